//! 4-connected component utilities on label grids.

use std::collections::VecDeque;

/// 4-connected components of a label grid.
pub(crate) struct Components {
    /// component id per pixel
    pub id: Vec<usize>,
    /// label of each component
    pub label: Vec<usize>,
    pub size: Vec<usize>,
}

pub(crate) fn components(labels: &[usize], width: usize, height: usize) -> Components {
    let n = width * height;
    let mut id = vec![usize::MAX; n];
    let mut label = Vec::new();
    let mut size = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..n {
        if id[start] != usize::MAX {
            continue;
        }
        let c = label.len();
        let l = labels[start];
        label.push(l);
        size.push(0);
        id[start] = c;
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            size[c] += 1;
            let (x, y) = (p % width, p / width);
            let mut visit = |q: usize| {
                if id[q] == usize::MAX && labels[q] == l {
                    id[q] = c;
                    queue.push_back(q);
                }
            };
            if x > 0 {
                visit(p - 1);
            }
            if x + 1 < width {
                visit(p + 1);
            }
            if y > 0 {
                visit(p - width);
            }
            if y + 1 < height {
                visit(p + width);
            }
        }
    }
    Components { id, label, size }
}

/// Makes every label region 4-connected.
///
/// Each label keeps one main component: the one containing its anchor pixel
/// when `anchors[label]` is given, otherwise its largest. Every other
/// component is merged into the adjacent region that is currently largest
/// (ties toward the lower label). Labels may disappear.
pub(crate) fn enforce_connectivity(labels: &mut [usize], width: usize, height: usize, anchors: Option<&[usize]>) {
    let comps = components(labels, width, height);
    let n_comp = comps.label.len();
    let n_labels = comps.label.iter().copied().max().map_or(0, |m| m + 1);

    let mut main = vec![usize::MAX; n_labels];
    if let Some(anchors) = anchors {
        for (l, &a) in anchors.iter().enumerate().take(n_labels) {
            if a < labels.len() && labels[a] == l {
                main[l] = comps.id[a];
            }
        }
    }
    for c in 0..n_comp {
        let l = comps.label[c];
        if main[l] == usize::MAX || (anchors.is_none() && comps.size[c] > comps.size[main[l]]) {
            main[l] = c;
        }
    }

    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n_comp];
    for y in 0..height {
        for x in 0..width {
            let p = y * width + x;
            let a = comps.id[p];
            if x + 1 < width && comps.id[p + 1] != a {
                adjacency[a].push(comps.id[p + 1]);
                adjacency[comps.id[p + 1]].push(a);
            }
            if y + 1 < height && comps.id[p + width] != a {
                adjacency[a].push(comps.id[p + width]);
                adjacency[comps.id[p + width]].push(a);
            }
        }
    }
    for adj in &mut adjacency {
        adj.sort_unstable();
        adj.dedup();
    }

    let mut assigned: Vec<Option<usize>> = vec![None; n_comp];
    let mut region_size = vec![0usize; n_labels];
    for (l, &c) in main.iter().enumerate() {
        if c != usize::MAX {
            assigned[c] = Some(l);
            region_size[l] += comps.size[c];
        }
    }
    loop {
        let mut progressed = false;
        let mut pending = false;
        for c in 0..n_comp {
            if assigned[c].is_some() {
                continue;
            }
            let target = adjacency[c]
                .iter()
                .filter_map(|&nb| assigned[nb])
                .max_by(|&a, &b| region_size[a].cmp(&region_size[b]).then(b.cmp(&a)));
            match target {
                Some(l) => {
                    assigned[c] = Some(l);
                    region_size[l] += comps.size[c];
                    progressed = true;
                }
                None => pending = true,
            }
        }
        if !pending || !progressed {
            break;
        }
    }
    for (p, l) in labels.iter_mut().enumerate() {
        if let Some(a) = assigned[comps.id[p]] {
            *l = a;
        }
    }
}

/// Renumbers labels to `0..k` preserving their order; returns `k` and the old label of each new one.
pub(crate) fn compact_labels(labels: &mut [usize]) -> (usize, Vec<usize>) {
    let mut used: Vec<usize> = labels.to_vec();
    used.sort_unstable();
    used.dedup();
    let max = used.last().copied().unwrap_or(0);
    let mut remap = vec![usize::MAX; max + 1];
    for (new, &old) in used.iter().enumerate() {
        remap[old] = new;
    }
    for l in labels.iter_mut() {
        *l = remap[*l];
    }
    (used.len(), used)
}
