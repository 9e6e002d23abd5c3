//! Small hand-built instances shared by unit tests.

use crate::instance::Instance;

/// One location, one demand point, one period; the point needs one facility.
pub(crate) fn unit_instance() -> Instance {
    Instance {
        locations: 1,
        demands: 1,
        periods: 1,
        scenarios: 1,
        open_cost: vec![vec![1.0]],
        close_cost: vec![vec![]],
        operate_cost: vec![vec![2.0]],
        location_cap: vec![1],
        period_cap: vec![1],
        initial_open: vec![0],
        covers: vec![vec![vec![vec![true]]]],
        threshold: vec![vec![vec![1]]],
        surplus_cost: vec![vec![vec![vec![]]]],
        shortage_cost: vec![vec![vec![vec![5.0]]]],
        prob: vec![1.0],
        seed: None,
    }
}

/// Two locations, two demand points, two periods, two scenarios.
pub(crate) fn tiny_2x2() -> Instance {
    let period_cap = vec![2u32, 2];
    let threshold = vec![vec![vec![1u32, 1], vec![1, 2]], vec![vec![1, 1], vec![2, 1]]];
    let surplus = |b: u32, p: u32| -> Vec<f64> { [-3.0, -1.5][..(p - b) as usize].to_vec() };
    let shortage = |b: u32| -> Vec<f64> {
        match b {
            1 => vec![6.0],
            _ => vec![4.0, 8.0],
        }
    };
    let surplus_cost = threshold
        .iter()
        .map(|st| {
            st.iter()
                .enumerate()
                .map(|(t, row)| row.iter().map(|&b| surplus(b, period_cap[t])).collect())
                .collect()
        })
        .collect();
    let shortage_cost = threshold
        .iter()
        .map(|st| st.iter().map(|row| row.iter().map(|&b| shortage(b)).collect()).collect())
        .collect();
    Instance {
        locations: 2,
        demands: 2,
        periods: 2,
        scenarios: 2,
        open_cost: vec![vec![3.0, 4.0], vec![5.0, 2.0]],
        close_cost: vec![vec![1.0], vec![2.0]],
        operate_cost: vec![vec![2.0, 2.0], vec![1.0, 3.0]],
        location_cap: vec![2, 2],
        period_cap,
        initial_open: vec![0, 0],
        covers: vec![
            vec![
                vec![vec![true, true], vec![false, true]],
                vec![vec![true, false], vec![false, true]],
            ],
            vec![
                vec![vec![true, false], vec![true, true]],
                vec![vec![false, false], vec![true, true]],
            ],
        ],
        threshold,
        surplus_cost,
        shortage_cost,
        prob: vec![0.4, 0.6],
        seed: None,
    }
}

#[test]
fn fixtures_are_valid() {
    assert_eq!(unit_instance().validate(), vec![]);
    assert_eq!(tiny_2x2().validate(), vec![]);
}
