//! Collective operations of the worker group. Every worker calls the same
//! collectives in the same order; each call draws one sequence number from
//! [`Comm::next_tag`] on every worker, participating or not, and derives the
//! tags of its message rounds from it.

use crate::assembly::JumpOperators;
use crate::{Error, Result};

use super::comm::{expect_indexed, expect_values, Comm, Payload};
use super::dvector::{DVector, Repr};
use super::group::WorkerGroup;

/// Values keyed by patch.
pub type PatchItems = Vec<(usize, Vec<f64>)>;

fn round(seq: u64, step: u64) -> u64 {
    seq * 8 + step
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Source {
    /// Own patch (position in the worker's patch list) and slot.
    Local(usize, usize),
    /// Position in the concatenated receive buffer.
    Remote(usize),
}

/// Precomputed message pattern of [`accumulate`] for one worker.
#[derive(Debug, Clone)]
pub struct AccumulatePlan {
    /// Per neighbour worker, the `(own patch position, slot)` entries sent.
    sends: Vec<(usize, Vec<(usize, usize)>)>,
    /// Per neighbour worker, the number of values received.
    recvs: Vec<(usize, usize)>,
    /// Per own patch and slot, the copies to sum in ascending patch order.
    sources: Vec<Vec<Vec<Source>>>,
}

fn slot_of(jumps: &JumpOperators, k: usize, r: usize) -> usize {
    jumps.patch_rows[k].binary_search(&r).expect("row listed for patch")
}

/// Entries of patch `k` whose row is also touched by a patch of worker `q`.
fn shared_slots(group: &WorkerGroup, jumps: &JumpOperators, k: usize, q: usize) -> Vec<usize> {
    jumps.patch_rows[k].iter().enumerate().filter(|(_, &r)| jumps.row_patches[r].iter().any(|&j| group.owner[j] == q)).map(|(s, _)| s).collect()
}

impl AccumulatePlan {
    pub fn new(group: &WorkerGroup, jumps: &JumpOperators, q: usize) -> Self {
        let own = &group.patches_of[q];
        let pos_of = |k: usize| own.iter().position(|&x| x == k).expect("own patch");
        let mut sends = Vec::new();
        let mut recvs = Vec::new();
        // (remote patch, slot) -> buffer position
        let mut remote = std::collections::HashMap::new();
        let mut offset = 0;
        for &nb in &group.neighbors[q] {
            let mut out = Vec::new();
            for (a, &k) in own.iter().enumerate() {
                out.extend(shared_slots(group, jumps, k, nb).into_iter().map(|s| (a, s)));
            }
            sends.push((nb, out));
            let mut count = 0;
            for &j in &group.patches_of[nb] {
                for s in shared_slots(group, jumps, j, q) {
                    remote.insert((j, s), offset + count);
                    count += 1;
                }
            }
            recvs.push((nb, count));
            offset += count;
        }
        let sources = own
            .iter()
            .map(|&k| {
                jumps.patch_rows[k]
                    .iter()
                    .map(|&r| {
                        jumps.row_patches[r]
                            .iter()
                            .map(|&j| {
                                let s = slot_of(jumps, j, r);
                                if group.owner[j] == q {
                                    Source::Local(pos_of(j), s)
                                } else {
                                    Source::Remote(remote[&(j, s)])
                                }
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self { sends, recvs, sources }
    }

    /// Workers this plan exchanges messages with.
    pub fn partners(&self) -> Vec<usize> {
        self.sends.iter().map(|(q, _)| *q).collect()
    }
}

/// Distributed to accumulated: every entry becomes the sum of its copies over
/// the patches sharing it, added in ascending patch order starting from zero.
/// Only neighbour workers exchange messages.
pub fn accumulate(comm: &mut Comm, plan: &AccumulatePlan, v: &DVector) -> Result<DVector> {
    if v.repr != Repr::Distributed {
        return Err(Error::InvalidArgument("accumulate expects a distributed vector".into()));
    }
    let tag = round(comm.next_tag(), 0);
    for (dst, entries) in &plan.sends {
        let vals = entries.iter().map(|&(a, s)| v.segments[a][s]).collect();
        comm.isend(*dst, tag, Payload::Values(vals))?.wait();
    }
    let handles: Vec<_> = plan.recvs.iter().map(|(src, _)| comm.irecv(*src, tag)).collect();
    let mut buffer = Vec::new();
    for (h, (src, n)) in handles.into_iter().zip(&plan.recvs) {
        let vals = expect_values(comm.wait(h)?)?;
        if vals.len() != *n {
            return Err(Error::Runtime(format!("worker {src} sent {} shared entries, expected {n}", vals.len())));
        }
        buffer.extend(vals);
    }
    let segments = plan
        .sources
        .iter()
        .map(|seg| {
            seg.iter()
                .map(|srcs| {
                    let mut x = 0.0;
                    for s in srcs {
                        x += match *s {
                            Source::Local(a, slot) => v.segments[a][slot],
                            Source::Remote(i) => buffer[i],
                        };
                    }
                    x
                })
                .collect()
        })
        .collect();
    Ok(DVector::new(Repr::Accumulated, segments))
}

/// Gathers `(index, values)` items of all `members` on every member, sorted
/// by index. Routed through the first member.
fn allgather_among(comm: &mut Comm, members: &[usize], mut items: PatchItems, tag: u64) -> Result<PatchItems> {
    let root = members[0];
    if comm.rank() == root {
        for &m in &members[1..] {
            items.extend(expect_indexed(comm.recv(m, tag)?)?);
        }
        items.sort_by_key(|(i, _)| *i);
        for &m in &members[1..] {
            comm.send(m, tag, Payload::Indexed(items.clone()))?;
        }
        Ok(items)
    } else {
        comm.send(root, tag, Payload::Indexed(items))?;
        expect_indexed(comm.recv(root, tag)?)
    }
}

/// `(u, v)` for distributed `u` and accumulated `v`. Deterministic mode sums
/// per-patch partials in patch order; fast mode folds per-worker partials in
/// arrival order.
pub fn ddot(comm: &mut Comm, group: &WorkerGroup, u: &DVector, v: &DVector, deterministic: bool) -> Result<f64> {
    if u.repr != Repr::Distributed || v.repr != Repr::Accumulated {
        return Err(Error::InvalidArgument("ddot expects a distributed and an accumulated operand".into()));
    }
    let seq = comm.next_tag();
    let q = comm.rank();
    let partials: Vec<(usize, f64)> =
        group.patches_of[q].iter().zip(u.segments.iter().zip(&v.segments)).map(|(&k, (a, b))| (k, crate::linalg::dot(a, b))).collect();
    if comm.size() == 1 {
        return Ok(partials.iter().fold(0.0, |s, (_, x)| s + x));
    }
    let all: Vec<usize> = (0..group.workers).collect();
    if deterministic {
        let items = partials.into_iter().map(|(k, x)| (k, vec![x])).collect();
        let gathered = allgather_among(comm, &all, items, round(seq, 0))?;
        return Ok(gathered.iter().fold(0.0, |s, (_, x)| s + x[0]));
    }
    let local = partials.iter().fold(0.0, |s, (_, x)| s + x);
    let tag = round(seq, 0);
    if q == 0 {
        let mut total = local;
        let others: Vec<usize> = (1..group.workers).collect();
        for _ in &others {
            let (_, p) = comm.recv_any(&others, tag)?;
            total += expect_values(p)?[0];
        }
        for &o in &others {
            comm.send(o, tag, Payload::Values(vec![total]))?;
        }
        Ok(total)
    } else {
        comm.send(0, tag, Payload::Values(vec![local]))?;
        Ok(expect_values(comm.recv(0, tag)?)?[0])
    }
}

/// Collects per-patch items on every holder: slaves send to their master,
/// then the masters exchange their groups' items. Returns the items sorted
/// by patch on holders and `None` elsewhere.
pub fn gather_to_holders(comm: &mut Comm, group: &WorkerGroup, items: PatchItems) -> Result<Option<PatchItems>> {
    let seq = comm.next_tag();
    let q = comm.rank();
    let master = group.master[q];
    if master != q {
        comm.send(master, round(seq, 0), Payload::Indexed(items))?;
        return Ok(None);
    }
    let mut collected = items;
    for s in group.group_of(q).into_iter().filter(|&s| s != q) {
        collected.extend(expect_indexed(comm.recv(s, round(seq, 0))?)?);
    }
    let mut all = if group.holders.len() > 1 { allgather_among(comm, &group.holders, collected, round(seq, 1))? } else { collected };
    all.sort_by_key(|(k, _)| *k);
    Ok(Some(all))
}

/// Sums per-patch primal contributions (`contrib[i]` belongs to primal
/// `primal_ids[k][i]`) into the global primal vector on every holder.
///
/// Deterministic mode adds patch by patch in ascending order, the order of the
/// serial embedding. Fast mode sends one full-length vector per worker and
/// folds in arrival order, first in each holder group and then on the first
/// holder, which broadcasts the result to the others.
pub fn reduce_primal(
    comm: &mut Comm,
    group: &WorkerGroup,
    primal_ids: &[Vec<usize>],
    n_primal: usize,
    contributions: PatchItems,
    deterministic: bool,
) -> Result<Option<Vec<f64>>> {
    if deterministic {
        let Some(all) = gather_to_holders(comm, group, contributions)? else { return Ok(None) };
        let mut out = vec![0.0; n_primal];
        for (k, vals) in all {
            for (&i, v) in primal_ids[k].iter().zip(vals) {
                out[i] += v;
            }
        }
        return Ok(Some(out));
    }
    let seq = comm.next_tag();
    let q = comm.rank();
    let mut local = vec![0.0; n_primal];
    for (k, vals) in contributions {
        for (&i, v) in primal_ids[k].iter().zip(vals) {
            local[i] += v;
        }
    }
    let master = group.master[q];
    if master != q {
        comm.send(master, round(seq, 0), Payload::Values(local))?;
        return Ok(None);
    }
    let slaves: Vec<usize> = group.group_of(q).into_iter().filter(|&s| s != q).collect();
    for _ in &slaves {
        let (_, p) = comm.recv_any(&slaves, round(seq, 0))?;
        for (a, b) in local.iter_mut().zip(expect_values(p)?) {
            *a += b;
        }
    }
    let root = group.holders[0];
    let others: Vec<usize> = group.holders[1..].to_vec();
    if q == root {
        for _ in &others {
            let (_, p) = comm.recv_any(&others, round(seq, 1))?;
            for (a, b) in local.iter_mut().zip(expect_values(p)?) {
                *a += b;
            }
        }
        for &h in &others {
            comm.send(h, round(seq, 2), Payload::Values(local.clone()))?;
        }
        Ok(Some(local))
    } else {
        comm.send(root, round(seq, 1), Payload::Values(local))?;
        Ok(Some(expect_values(comm.recv(root, round(seq, 2))?)?))
    }
}

/// Sends every slave the primal entries its patches use (`needed[q]`,
/// sorted). Returns a full-length vector that is exact on the needed entries
/// and zero elsewhere. With every worker a holder no messages are sent.
pub fn scatter_primal(comm: &mut Comm, group: &WorkerGroup, needed: &[Vec<usize>], n_primal: usize, w: Option<&[f64]>) -> Result<Vec<f64>> {
    let seq = comm.next_tag();
    let q = comm.rank();
    let master = group.master[q];
    if master == q {
        let w = w.ok_or_else(|| Error::Runtime(format!("holder {q} has no coarse solution to scatter")))?;
        for s in group.group_of(q).into_iter().filter(|&s| s != q) {
            let vals = needed[s].iter().map(|&i| w[i]).collect();
            comm.isend(s, round(seq, 0), Payload::Values(vals))?.wait();
        }
        return Ok(w.to_vec());
    }
    let vals = expect_values(comm.recv(master, round(seq, 0))?)?;
    if vals.len() != needed[q].len() {
        return Err(Error::Runtime(format!("worker {q} received {} primal entries, expected {}", vals.len(), needed[q].len())));
    }
    let mut out = vec![0.0; n_primal];
    for (&i, v) in needed[q].iter().zip(vals) {
        out[i] = v;
    }
    Ok(out)
}

/// Compares the holders' copies of `w` bit for bit.
pub fn check_holders_agree(comm: &mut Comm, group: &WorkerGroup, w: Option<&[f64]>) -> Result<()> {
    let seq = comm.next_tag();
    let q = comm.rank();
    if group.holders.len() < 2 || group.master[q] != q {
        return Ok(());
    }
    let w = w.ok_or_else(|| Error::Runtime(format!("holder {q} has no coarse solution")))?;
    let all = allgather_among(comm, &group.holders, vec![(q, w.to_vec())], round(seq, 0))?;
    for (h, v) in &all {
        if v.len() != w.len() || v.iter().zip(w).any(|(a, b)| a.to_bits() != b.to_bits()) {
            return Err(Error::Consistency(format!("coarse solution on holder {h} differs from holder {q}")));
        }
    }
    Ok(())
}

/// Per-patch items from every worker on every worker, sorted by index.
pub fn allgather(comm: &mut Comm, group: &WorkerGroup, items: PatchItems) -> Result<PatchItems> {
    let seq = comm.next_tag();
    if group.workers == 1 {
        let mut items = items;
        items.sort_by_key(|(i, _)| *i);
        return Ok(items);
    }
    let all: Vec<usize> = (0..group.workers).collect();
    allgather_among(comm, &all, items, round(seq, 0))
}
