// Frozen result of `derive_pmm_case_truth(PMM_TRUTH_CASES, PMM_TRUTH_SEED)`; a test
// checks that re-deriving reproduces these values.

const PMM_TRUTH_AGE_KNOTS: [f64; 4] = [
    55.00726555363663,
    73.99979808949907,
    59.630206035838924,
    69.21805142549046,
];
const PMM_TRUTH_TIME_KNOTS: [f64; 4] = [0.0, 5.0, 4.9999999999999996e-6, 3.0];
const PMM_TRUTH_THETA: [f64; 7] = [
    2.5892825064249423,
    0.006369207557102361,
    0.03593666198670257,
    -0.0047494790836981994,
    0.028591922689222213,
    -0.21090689576454114,
    -0.17570158534689073,
];
const PMM_TRUTH_SD: [f64; 4] = [
    0.7487419345251736,
    0.356761695644168,
    0.46362484482976835,
    0.45473253108725975,
];
const PMM_TRUTH_CPC: [f64; 6] = [
    0.08404473535561476,
    0.16178564360251027,
    -0.0015114661384446944,
    0.2341544705121022,
    -0.09100415668100827,
    0.9999092042625951,
];
const PMM_TRUTH_SIGMA_XI: f64 = 0.4110939134643587;

fn frozen_pmm_case_truth() -> LmmFit {
    let [a0, a1, a2, a3] = PMM_TRUTH_AGE_KNOTS;
    let [t0, t1, t2, t3] = PMM_TRUTH_TIME_KNOTS;
    let spec = LmmSpec::Spline {
        age: spec_from_knots((a0, a1), (a2, a3)),
        time: spec_from_knots((t0, t1), (t2, t3)),
    };
    LmmFit::from_parameters(
        spec,
        PMM_TRUTH_THETA.to_vec(),
        CorrelatedScales::new(PMM_TRUTH_SD.to_vec(), PMM_TRUTH_CPC.to_vec()),
        PMM_TRUTH_SIGMA_XI,
    )
    .expect("frozen truth is valid")
}
