// Exhaustive search over the symmetric Hopfield parameterization for the
// 3x3 stripe task: classes S (columns 0,2) and C (column 1), parameters
// (b_S, b_C, w_SS, w_CC, w_SC). Checks stored-pattern fixpoint marginals and
// probe convergence probability within 5 iterations via exact DP.
use qsnn::circuitry::{ParamKey, ParameterTable};
use qsnn::models;
use qsnn::sampler::output_marginals;

fn class_of(i: usize) -> usize { if i % 3 == 1 { 1 } else { 0 } }

fn build_params(top: &qsnn::NetworkTopology, b: [f64; 2], w: [[f64; 2]; 2]) -> ParameterTable {
    let mut t = ParameterTable::new();
    for key in top.parameter_keys() {
        match key {
            ParamKey::Bias { node } => t.set(key, b[class_of(node - 9)]),
            ParamKey::Weight { from, to } => t.set(key, w[class_of(from)][class_of(to - 9)]),
        }
    }
    t
}

fn main() {
    let top = models::hopfield(9).unwrap();
    let a: Vec<bool> = (0..9).map(|i| i % 3 != 1).collect();
    let bpat: Vec<bool> = a.iter().map(|&x| !x).collect();
    let stored = [a.clone(), bpat.clone()];

    let grid: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    let mut best: Option<(f64, [f64; 5])> = None;
    let mut survivors = Vec::new();
    for &bs in &grid {
        for &bc in &grid {
            for &wss in &grid {
                for &wcc in &grid {
                    for &wsc in &grid {
                        let params = build_params(&top, [bs, bc], [[wss, wsc], [wsc, wcc]]);
                        let mut ok = true;
                        let mut margin = 1.0f64;
                        for p in &stored {
                            let m = output_marginals(&top, &params, p).unwrap();
                            for (j, &pj) in m.iter().enumerate() {
                                let good = if p[j] { pj } else { 1.0 - pj };
                                if good < 0.9 { ok = false; break; }
                                margin = margin.min(good);
                            }
                            if !ok { break; }
                        }
                        if ok {
                            survivors.push((margin, [bs, bc, wss, wcc, wsc]));
                        }
                    }
                }
            }
        }
    }
    println!("fixpoint survivors: {}", survivors.len());
    survivors.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());
    survivors.truncate(400);

    // Exact probe-convergence DP for the survivors.
    for (margin, cand) in survivors {
        let params = build_params(&top, [cand[0], cand[1]], [[cand[2], cand[4]], [cand[4], cand[3]]]);
        // transition marginals for all 512 patterns
        let mut marg = Vec::with_capacity(512);
        for x in 0..512usize {
            let bits: Vec<bool> = (0..9).map(|i| (x >> i) & 1 == 1).collect();
            marg.push(output_marginals(&top, &params, &bits).unwrap());
        }
        let pat_index = |p: &[bool]| -> usize { p.iter().enumerate().map(|(i, &b)| if b { 1 << i } else { 0 }).sum() };
        let mut worst = 1.0f64;
        for (src, pattern) in stored.iter().enumerate() {
            let target = pat_index(pattern);
            let _ = src;
            for f in 0..9 {
                let mut probe = pattern.clone();
                probe[f] = !probe[f];
                // P(reach target within 5 steps), target absorbing.
                let mut reach = vec![0.0f64; 512];
                reach[target] = 1.0;
                for _ in 0..5 {
                    let mut next = vec![0.0f64; 512];
                    next[target] = 1.0;
                    for x in 0..512usize {
                        if x == target { continue; }
                        // sum over y: P(x->y) reach[y]; 512*512 too slow? 512*512*candidates... use factorization: P(x->y) = prod_j q_j(y_j).
                        let m = &marg[x];
                        let mut total = 0.0;
                        for (y, &r) in reach.iter().enumerate() {
                            if r == 0.0 { continue; }
                            let mut p = 1.0;
                            for (j, &mj) in m.iter().enumerate() {
                                p *= if (y >> j) & 1 == 1 { mj } else { 1.0 - mj };
                                if p == 0.0 { break; }
                            }
                            total += p * r;
                        }
                        next[x] = total.min(1.0);
                    }
                    reach = next;
                }
                worst = worst.min(reach[pat_index(&probe)]);
            }
        }
        if best.is_none() || worst > best.unwrap().0 {
            best = Some((worst, cand));
            println!("margin {margin:.3} cand {cand:?} worst probe convergence {worst:.3}");
        }
        if worst > 0.99 { break; }
    }
    println!("best: {best:?}");
}
