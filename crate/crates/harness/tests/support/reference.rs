//! A plain UCB MCTS over layered states, written against the `MdpModel`
//! trait only. It draws random numbers in the same order as the planner:
//! expansion slot, transition sample, rollout action and sample, and a
//! tie-break only when a tie exists.

use std::collections::HashMap;

use oga_core::{ActionId, MdpModel, StateKey};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Node {
    untried: Vec<usize>,
    edges: Vec<Option<usize>>,
    total: u64,
    terminal: bool,
    layer: usize,
    key: StateKey,
}

struct Edge {
    visits: u64,
    sum: f64,
}

struct Tree<'a> {
    model: &'a dyn MdpModel,
    horizon: usize,
    index: HashMap<(usize, StateKey), usize>,
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    // moments of every mean recorded during backups
    count: u64,
    sum: f64,
    sum_sq: f64,
}

impl Tree<'_> {
    fn node(&mut self, layer: usize, key: &StateKey) -> usize {
        if let Some(&i) = self.index.get(&(layer, key.clone())) {
            return i;
        }
        let terminal = layer >= self.horizon || self.model.is_terminal(key);
        let n = if terminal {
            0
        } else {
            self.model.action_count(key)
        };
        self.nodes.push(Node {
            untried: (0..n).collect(),
            edges: vec![None; n],
            total: 0,
            terminal,
            layer,
            key: key.clone(),
        });
        self.index
            .insert((layer, key.clone()), self.nodes.len() - 1);
        self.nodes.len() - 1
    }

    fn lambda(&self, c: f64) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        let mean = self.sum / n;
        c * (self.sum_sq / n - mean * mean).max(0.0).sqrt()
    }
}

fn pick_best(scored: &[(usize, f64)], rng: &mut ChaCha8Rng) -> usize {
    let best = scored.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = scored.iter().filter(|s| s.1 >= best).map(|s| s.0).collect();
    if ties.len() == 1 {
        ties[0]
    } else {
        ties[rng.gen_range(0..ties.len())]
    }
}

fn decide(
    model: &dyn MdpModel,
    root: &StateKey,
    horizon: usize,
    budget: usize,
    c: f64,
    rng: &mut ChaCha8Rng,
) -> usize {
    let mut t = Tree {
        model,
        horizon,
        index: HashMap::new(),
        nodes: Vec::new(),
        edges: Vec::new(),
        count: 0,
        sum: 0.0,
        sum_sq: 0.0,
    };
    let root = t.node(0, root);
    for _ in 0..budget {
        let lambda = t.lambda(c);
        let mut path: Vec<(usize, usize, f64)> = Vec::new();
        let mut cur = root;
        while !t.nodes[cur].terminal {
            let key = t.nodes[cur].key.clone();
            let layer = t.nodes[cur].layer;
            if !t.nodes[cur].untried.is_empty() {
                let slot = rng.gen_range(0..t.nodes[cur].untried.len());
                let a = t.nodes[cur].untried.swap_remove(slot);
                let o = model.sample_transition(&key, ActionId(a), rng).unwrap();
                t.edges.push(Edge {
                    visits: 0,
                    sum: 0.0,
                });
                t.nodes[cur].edges[a] = Some(t.edges.len() - 1);
                path.push((cur, a, o.reward));
                cur = t.node(layer + 1, &o.successor);
                break;
            }
            let total = t.nodes[cur].total as f64;
            let scored: Vec<(usize, f64)> = t.nodes[cur]
                .edges
                .iter()
                .enumerate()
                .filter_map(|(a, e)| e.map(|e| (a, &t.edges[e])))
                .map(|(a, e)| {
                    let n = e.visits as f64;
                    (a, e.sum / n + lambda * (total.ln() / n).sqrt())
                })
                .collect();
            let a = pick_best(&scored, rng);
            let o = model.sample_transition(&key, ActionId(a), rng).unwrap();
            path.push((cur, a, o.reward));
            cur = t.node(layer + 1, &o.successor);
        }

        let mut tail = 0.0;
        if !t.nodes[cur].terminal {
            let mut s = t.nodes[cur].key.clone();
            let mut layer = t.nodes[cur].layer;
            while layer < horizon && !model.is_terminal(&s) {
                let a = rng.gen_range(0..model.action_count(&s));
                let o = model.sample_transition(&s, ActionId(a), rng).unwrap();
                tail += o.reward;
                s = o.successor;
                layer += 1;
            }
        }

        let mut ret = tail;
        for &(node, a, r) in path.iter().rev() {
            ret += r;
            let e = &mut t.edges[t.nodes[node].edges[a].unwrap()];
            e.visits += 1;
            e.sum += ret;
            let mean = e.sum / e.visits as f64;
            t.nodes[node].total += 1;
            t.count += 1;
            t.sum += mean;
            t.sum_sq += mean * mean;
        }
    }

    let scored: Vec<(usize, f64)> = t.nodes[root]
        .edges
        .iter()
        .enumerate()
        .filter_map(|(a, e)| e.map(|e| (a, &t.edges[e])))
        .filter(|(_, e)| e.visits > 0)
        .map(|(a, e)| (a, e.sum / e.visits as f64))
        .collect();
    if scored.is_empty() {
        return rng.gen_range(0..t.nodes[root].edges.len());
    }
    pick_best(&scored, rng)
}

/// Plays one episode; returns the chosen actions and the return.
pub fn play(
    model: &dyn MdpModel,
    budget: usize,
    c: f64,
    horizon: usize,
    seed: u64,
) -> (Vec<usize>, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = model.initial_state();
    let mut actions = Vec::new();
    let mut ret = 0.0;
    for step in 0..horizon {
        if model.is_terminal(&state) {
            break;
        }
        let a = decide(model, &state, horizon - step, budget, c, &mut rng);
        let o = model
            .sample_transition(&state, ActionId(a), &mut rng)
            .unwrap();
        ret += o.reward;
        actions.push(a);
        state = o.successor;
    }
    (actions, ret)
}
