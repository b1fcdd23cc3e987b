use std::path::Path;

use anyhow::Result;
use earlydetect_core::methods::fit_method;

use super::{emit, load_data, select};
use crate::config::{usage, Config};
use crate::fitfile::render_fit;
use crate::io::Split;

/// Fit one method on the selected split and render the fit file.
pub fn fit(cfg: &Config) -> Result<String> {
    let methods = cfg.methods("method", false)?;
    let [method] = methods[..] else {
        return Err(usage("fit takes exactly one method"));
    };
    let data = load_data(cfg)?;
    let split = match cfg.get("split").unwrap_or("train") {
        "train" => Some(Split::Train),
        "test" => Some(Split::Test),
        "all" => None,
        other => return Err(usage(format!("unknown split '{other}' (expected train, test or all)"))),
    };
    let train = select(&data, split);
    if train.is_empty() {
        return Err(usage("no subjects in the selected split"));
    }
    let fitted = fit_method(method, &train)?;
    if !fitted.converged() {
        log::warn!("{}: optimizer did not converge; estimates written with converged=false", method.name());
    } else if fitted.flagged() {
        log::warn!("{}: a parameter sits at its bound or the information matrix is singular", method.name());
    }
    Ok(render_fit(&fitted, train.len()))
}

pub fn cmd_fit(cfg: &Config) -> Result<()> {
    let text = fit(cfg)?;
    emit(cfg.path("out").as_deref().map(Path::new), text.as_bytes())
}
