//! Solves the bandwidth / compute allocation for a fixed selection and
//! placement, and cross-checks it against the brute-force grid search.

use coopsense::resalloc::{brute_force_oracle, solve_p2, ActiveLink, ActiveProblem, ComputeNode};

fn main() {
    // vehicles 1 and 2 ship data to the RSU (node 4), vehicle 3 to vehicle 0
    let problem = ActiveProblem {
        links: vec![
            ActiveLink { from: 1, to: 4, c_link: 0.004 },
            ActiveLink { from: 2, to: 4, c_link: 0.006 },
            ActiveLink { from: 3, to: 0, c_link: 0.005 },
        ],
        nodes: vec![
            ComputeNode { node: 0, c_node: 0.004, capacity: 1e10 },
            ComputeNode { node: 4, c_node: 0.0015, capacity: 2e11 },
        ],
        omega: 0.5,
        deadline: 0.02,
        total_capacity: 2.4e11,
    };
    let fast = solve_p2(&problem);
    let slow = brute_force_oracle(&problem, 200);
    match fast.allocation() {
        Some(a) => {
            for (node, alpha) in &a.alpha {
                println!("node {node}: compute fraction {alpha:.4}");
            }
            for ((from, to), beta) in &a.beta {
                println!("link {from}->{to}: bandwidth fraction {beta:.4}");
            }
            println!("cost {:.6} (grid search {:.6})", a.cost, slow.cost().unwrap_or(f64::NAN));
        }
        None => println!("infeasible"),
    }
}
