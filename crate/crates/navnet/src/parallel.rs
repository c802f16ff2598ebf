use std::thread;

use navnet_core::preprocess::WindowedDataset;
use navnet_core::rnn::{LossSpec, Network, Real};
use navnet_core::train::{BatchRunner, ChunkWork};

/// Runs batch chunks on up to `jobs` scoped threads. Chunk `c` goes to
/// worker `c % jobs`; results land in fixed slots, so the reduction order
/// and therefore the trained weights do not depend on `jobs`.
#[derive(Debug, Clone, Copy)]
pub struct Threads {
    pub jobs: usize,
}

impl Threads {
    pub fn new(jobs: usize) -> Threads {
        Threads { jobs: jobs.max(1) }
    }

    pub fn available() -> Threads {
        Threads::new(thread::available_parallelism().map_or(1, |n| n.get()))
    }
}

impl BatchRunner for Threads {
    fn run_chunks<T: Real>(
        &self,
        net: &Network<T>,
        data: &WindowedDataset,
        chunks: &[&[usize]],
        spec: &LossSpec,
        backward: bool,
        work: &mut [ChunkWork<T>],
    ) {
        let jobs = self.jobs.min(chunks.len());
        if jobs <= 1 {
            for (c, w) in chunks.iter().zip(work.iter_mut()) {
                w.run(net, data, c, spec, backward);
            }
            return;
        }
        let mut lanes: Vec<Vec<(&[usize], &mut ChunkWork<T>)>> = (0..jobs).map(|_| Vec::new()).collect();
        for (i, (c, w)) in chunks.iter().zip(work.iter_mut()).enumerate() {
            lanes[i % jobs].push((c, w));
        }
        thread::scope(|s| {
            for lane in lanes {
                s.spawn(move || {
                    for (c, w) in lane {
                        w.run(net, data, c, spec, backward);
                    }
                });
            }
        });
    }
}

/// Maps `f` over `items` on up to `jobs` scoped threads; results keep the
/// input order.
pub fn parallel_map<I, R, F>(jobs: usize, items: &[I], f: F) -> Vec<R>
where
    I: Sync,
    R: Send,
    F: Fn(&I) -> R + Sync,
{
    let jobs = jobs.clamp(1, items.len().max(1));
    if jobs == 1 {
        return items.iter().map(f).collect();
    }
    let mut slots: Vec<Option<R>> = (0..items.len()).map(|_| None).collect();
    let per = items.len().div_ceil(jobs);
    thread::scope(|s| {
        for (inp, out) in items.chunks(per).zip(slots.chunks_mut(per)) {
            let f = &f;
            s.spawn(move || {
                for (i, o) in inp.iter().zip(out) {
                    *o = Some(f(i));
                }
            });
        }
    });
    slots.into_iter().map(|r| r.expect("every slot is filled")).collect()
}
