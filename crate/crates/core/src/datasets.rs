//! Dataset loading and synthesis: IDX (big-endian) files for the MNIST
//! family, the procedural four-class geometric toy set, and balanced
//! train/validation/test splits with per-batch class balance.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone)]
pub struct LabeledImageSet {
    /// Pixel arrays in [0, 1], row-major.
    pub images: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub class_count: usize,
    pub dims: (usize, usize),
}

impl LabeledImageSet {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Enforce a fixed class count; labels at or above it are inconsistent.
    pub fn expect_classes(mut self, class_count: usize) -> Result<Self> {
        if let Some(bad) = self.labels.iter().find(|&&l| l as usize >= class_count) {
            return Err(Error::Data(format!(
                "label {bad} out of range for {class_count} classes"
            )));
        }
        self.class_count = class_count;
        Ok(self)
    }
}

fn read_u32_be(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(Error::Data(format!("{what}: file truncated in header")));
    }
    Ok(u32::from_be_bytes(bytes[offset..end].try_into().unwrap()))
}

/// Parse an IDX image/label file pair into a labeled set. Pixels are scaled
/// from u8 to [0, 1]; the class count is the highest label plus one.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<LabeledImageSet> {
    let image_bytes = fs::read(images_path)?;
    let label_bytes = fs::read(labels_path)?;

    let magic = read_u32_be(&image_bytes, 0, "images")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Format(format!(
            "images: bad magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}"
        )));
    }
    let n_images = read_u32_be(&image_bytes, 4, "images")? as usize;
    let rows = read_u32_be(&image_bytes, 8, "images")? as usize;
    let cols = read_u32_be(&image_bytes, 12, "images")? as usize;
    let pixel_count = n_images
        .checked_mul(rows * cols)
        .ok_or_else(|| Error::Data("images: dimension overflow".into()))?;
    let payload = &image_bytes[16.min(image_bytes.len())..];
    if payload.len() != pixel_count {
        return Err(Error::Data(format!(
            "images: header promises {pixel_count} pixels, file holds {}",
            payload.len()
        )));
    }

    let magic = read_u32_be(&label_bytes, 0, "labels")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::Format(format!(
            "labels: bad magic 0x{magic:08x}, expected 0x{IDX_LABELS_MAGIC:08x}"
        )));
    }
    let n_labels = read_u32_be(&label_bytes, 4, "labels")? as usize;
    let label_payload = &label_bytes[8.min(label_bytes.len())..];
    if label_payload.len() != n_labels {
        return Err(Error::Data(format!(
            "labels: header promises {n_labels} labels, file holds {}",
            label_payload.len()
        )));
    }

    if n_images != n_labels {
        return Err(Error::Data(format!(
            "{n_images} images but {n_labels} labels"
        )));
    }

    let images: Vec<Vec<f64>> = payload
        .chunks_exact(rows * cols)
        .map(|chunk| chunk.iter().map(|&b| f64::from(b) / 255.0).collect())
        .collect();
    let labels = label_payload.to_vec();
    let class_count = labels.iter().copied().max().map_or(0, |m| m as usize + 1);

    Ok(LabeledImageSet { images, labels, class_count, dims: (rows, cols) })
}

/// Write a labeled set as an IDX image/label file pair (pixels quantized to
/// u8), so synthesized datasets travel through the same loader as the
/// published ones.
pub fn save_idx(set: &LabeledImageSet, images_path: &Path, labels_path: &Path) -> Result<()> {
    let (rows, cols) = set.dims;
    let mut image_bytes = Vec::with_capacity(16 + set.len() * rows * cols);
    image_bytes.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    image_bytes.extend_from_slice(&(set.len() as u32).to_be_bytes());
    image_bytes.extend_from_slice(&(rows as u32).to_be_bytes());
    image_bytes.extend_from_slice(&(cols as u32).to_be_bytes());
    for image in &set.images {
        if image.len() != rows * cols {
            return Err(Error::Shape("image size does not match set dims".into()));
        }
        image_bytes.extend(image.iter().map(|&p| (p.clamp(0.0, 1.0) * 255.0).round() as u8));
    }

    let mut label_bytes = Vec::with_capacity(8 + set.len());
    label_bytes.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    label_bytes.extend_from_slice(&(set.len() as u32).to_be_bytes());
    label_bytes.extend_from_slice(&set.labels);

    fs::write(images_path, image_bytes)?;
    fs::write(labels_path, label_bytes)?;
    Ok(())
}

pub const GEOMETRIC_CLASSES: [&str; 4] = ["triangle", "circle", "square", "cross"];
pub const GEOMETRIC_DIMS: (usize, usize) = (15, 15);

/// Versioned base templates for the toy set: outline shapes with a ~2 px
/// stroke on a 15x15 grid, intensity 1 on the stroke.
pub fn geometric_template(class: usize) -> Vec<f64> {
    let (h, w) = GEOMETRIC_DIMS;
    let mut img = vec![0.0; h * w];
    let mut set = |r: i32, c: i32| {
        if (0..h as i32).contains(&r) && (0..w as i32).contains(&c) {
            img[r as usize * w + c as usize] = 1.0;
        }
    };
    match class {
        // triangle: apex top-center, horizontal base
        0 => {
            for (r0, c0, r1, c1) in [(2, 7, 12, 2), (2, 7, 12, 12), (12, 2, 12, 12)] {
                draw_line(r0, c0, r1, c1, &mut set);
            }
        }
        // circle: annulus of radius 5 around the center
        1 => {
            for r in 0..h as i32 {
                for c in 0..w as i32 {
                    let d = (((r - 7).pow(2) + (c - 7).pow(2)) as f64).sqrt();
                    if (d - 5.0).abs() <= 1.0 {
                        set(r, c);
                    }
                }
            }
        }
        // square: 2 px border between rows/cols 3 and 11
        2 => {
            for r in 3..=11 {
                for c in 3..=11 {
                    if r <= 4 || r >= 10 || c <= 4 || c >= 10 {
                        set(r, c);
                    }
                }
            }
        }
        // cross: plus sign with 3 px arms
        3 => {
            for r in 0..h as i32 {
                for c in 0..w as i32 {
                    let in_h = (6..=8).contains(&r) && (2..=12).contains(&c);
                    let in_v = (6..=8).contains(&c) && (2..=12).contains(&r);
                    if in_h || in_v {
                        set(r, c);
                    }
                }
            }
        }
        _ => panic!("geometric class index {class} out of range"),
    }
    img
}

/// 2 px thick Bresenham segment.
fn draw_line(r0: i32, c0: i32, r1: i32, c1: i32, set: &mut impl FnMut(i32, i32)) {
    let dr = (r1 - r0).abs();
    let dc = (c1 - c0).abs();
    let sr = if r0 < r1 { 1 } else { -1 };
    let sc = if c0 < c1 { 1 } else { -1 };
    let (mut r, mut c) = (r0, c0);
    let mut err = dc - dr;
    loop {
        set(r, c);
        // thicken across the minor axis
        if dc >= dr {
            set(r + 1, c);
        } else {
            set(r, c + 1);
        }
        if r == r1 && c == c1 {
            break;
        }
        let e2 = 2 * err;
        if e2 > -dr {
            err -= dr;
            c += sc;
        }
        if e2 < dc {
            err += dc;
            r += sr;
        }
    }
}

/// Synthesize the four-class geometric set: class-balanced, additive
/// Gaussian pixel noise, clipped to [0, 1].
pub fn generate_geometric<R: Rng>(
    n_total: usize,
    noise_std: f64,
    rng: &mut R,
) -> Result<LabeledImageSet> {
    if noise_std < 0.0 {
        return Err(Error::InvalidInput("noise_std must be >= 0".into()));
    }
    let templates: Vec<Vec<f64>> = (0..4).map(geometric_template).collect();
    let noise = if noise_std > 0.0 {
        Some(Normal::new(0.0, noise_std).map_err(|e| Error::InvalidInput(e.to_string()))?)
    } else {
        None
    };
    let mut images = Vec::with_capacity(n_total);
    let mut labels = Vec::with_capacity(n_total);
    for i in 0..n_total {
        let class = i % 4;
        let mut img = templates[class].clone();
        if let Some(n) = &noise {
            for p in &mut img {
                *p = (*p + n.sample(rng)).clamp(0.0, 1.0);
            }
        }
        images.push(img);
        labels.push(class as u8);
    }
    Ok(LabeledImageSet { images, labels, class_count: 4, dims: GEOMETRIC_DIMS })
}

/// Split sizes and batch structure.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SplitPlan {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub batch_size: usize,
    pub n_batches: usize,
    pub balance: bool,
}

impl Default for SplitPlan {
    fn default() -> Self {
        SplitPlan { n_train: 6000, n_val: 100, n_test: 1000, batch_size: 400, n_batches: 15, balance: true }
    }
}

impl SplitPlan {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size * self.n_batches != self.n_train {
            return Err(Error::InvalidInput(format!(
                "batch_size {} x n_batches {} != n_train {}",
                self.batch_size, self.n_batches, self.n_train
            )));
        }
        // n_test may be zero when test samples come from a separate pool
        if self.n_val == 0 || self.batch_size == 0 {
            return Err(Error::InvalidInput("split sizes must be nonzero".into()));
        }
        Ok(())
    }
}

/// Index-based split: train batches plus validation and test index lists,
/// all disjoint.
#[derive(Debug, Clone)]
pub struct Split {
    pub batches: Vec<Vec<usize>>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Spread `total` items over `parts` slots so counts differ by at most one,
/// rotating which slots get the extra item by `phase`.
fn spread(total: usize, parts: usize, phase: usize) -> Vec<usize> {
    let base = total / parts;
    let extra = total % parts;
    (0..parts).map(|i| base + usize::from((i + phase) % parts < extra)).collect()
}

/// Deterministic class-balanced split. Each batch, the validation split and
/// the test split get per-class counts that differ by at most one.
pub fn balanced_split(set: &LabeledImageSet, plan: &SplitPlan, seed: u64) -> Result<Split> {
    plan.validate()?;
    let needed = plan.n_train + plan.n_val + plan.n_test;
    if set.len() < needed {
        return Err(Error::Data(format!(
            "split needs {needed} samples, set holds {}",
            set.len()
        )));
    }
    let classes = set.class_count.max(1);
    let mut rng = crate::rng::stream(seed, "split");

    if !plan.balance {
        let mut order: Vec<usize> = (0..set.len()).collect();
        order.shuffle(&mut rng);
        let train: Vec<usize> = order[..plan.n_train].to_vec();
        let val = order[plan.n_train..plan.n_train + plan.n_val].to_vec();
        let test = order[plan.n_train + plan.n_val..needed].to_vec();
        let batches = train.chunks(plan.batch_size).map(<[usize]>::to_vec).collect();
        return Ok(Split { batches, val, test });
    }

    // per-class index pools, shuffled once
    let mut pools: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &label) in set.labels.iter().enumerate() {
        pools[label as usize].push(i);
    }
    for pool in &mut pools {
        pool.shuffle(&mut rng);
    }

    // capacity check: total demand per class across all slots
    let mut demand = vec![0usize; classes];
    for (b, counts) in (0..plan.n_batches).map(|b| (b, spread(plan.batch_size, classes, b))) {
        let _ = b;
        for (c, n) in counts.iter().enumerate() {
            demand[c] += n;
        }
    }
    for (c, n) in spread(plan.n_val, classes, 0).iter().enumerate() {
        demand[c] += n;
    }
    for (c, n) in spread(plan.n_test, classes, 1).iter().enumerate() {
        demand[c] += n;
    }
    for c in 0..classes {
        if pools[c].len() < demand[c] {
            return Err(Error::Data(format!(
                "class {c} has {} samples, balanced plan needs {}",
                pools[c].len(),
                demand[c]
            )));
        }
    }

    let mut cursors = vec![0usize; classes];
    let take = |class: usize, n: usize, cursors: &mut Vec<usize>| -> Vec<usize> {
        let start = cursors[class];
        cursors[class] += n;
        pools[class][start..start + n].to_vec()
    };

    let mut batches = Vec::with_capacity(plan.n_batches);
    for b in 0..plan.n_batches {
        let mut batch = Vec::with_capacity(plan.batch_size);
        for (c, n) in spread(plan.batch_size, classes, b).iter().enumerate() {
            batch.extend(take(c, *n, &mut cursors));
        }
        batch.shuffle(&mut rng);
        batches.push(batch);
    }
    let mut val = Vec::with_capacity(plan.n_val);
    for (c, n) in spread(plan.n_val, classes, 0).iter().enumerate() {
        val.extend(take(c, *n, &mut cursors));
    }
    val.shuffle(&mut rng);
    let mut test = Vec::with_capacity(plan.n_test);
    for (c, n) in spread(plan.n_test, classes, 1).iter().enumerate() {
        test.extend(take(c, *n, &mut cursors));
    }
    test.shuffle(&mut rng);

    Ok(Split { batches, val, test })
}

/// Draw a class-balanced subset of `n` indices (per-class counts differ by at
/// most one), deterministic under the seed.
pub fn balanced_subset(set: &LabeledImageSet, n: usize, seed: u64) -> Result<Vec<usize>> {
    if n > set.len() {
        return Err(Error::Data(format!("subset of {n} from a set of {}", set.len())));
    }
    let classes = set.class_count.max(1);
    let mut rng = crate::rng::stream(seed, "subset");
    let mut pools: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &label) in set.labels.iter().enumerate() {
        pools[label as usize].push(i);
    }
    for pool in &mut pools {
        pool.shuffle(&mut rng);
    }
    let mut out = Vec::with_capacity(n);
    for (c, want) in spread(n, classes, 0).iter().enumerate() {
        if pools[c].len() < *want {
            return Err(Error::Data(format!(
                "class {c} has {} samples, balanced subset needs {want}",
                pools[c].len()
            )));
        }
        out.extend_from_slice(&pools[c][..*want]);
    }
    out.shuffle(&mut rng);
    Ok(out)
}

/// Locate the IDX file pair for a named dataset under a root directory.
/// Layout: `<root>/<dataset>/{train,t10k}-{images-idx3,labels-idx1}-ubyte`.
pub fn dataset_paths(root: &Path, dataset: &str) -> Result<(PathBuf, PathBuf, PathBuf, PathBuf)> {
    let dir = root.join(dataset);
    let locate = |stem: &str| -> Result<PathBuf> {
        let plain = dir.join(stem);
        if plain.exists() {
            return Ok(plain);
        }
        // some distributions ship with a dot before the type suffix
        let dotted = dir.join(stem.replacen("-idx", ".idx", 1));
        if dotted.exists() {
            return Ok(dotted);
        }
        Err(Error::Data(format!("dataset file not found: {}", plain.display())))
    };
    Ok((
        locate("train-images-idx3-ubyte")?,
        locate("train-labels-idx1-ubyte")?,
        locate("t10k-images-idx3-ubyte")?,
        locate("t10k-labels-idx1-ubyte")?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use std::collections::HashSet;

    fn write_idx_pair(
        dir: &Path,
        n: usize,
        dims: (usize, usize),
        truncate_images: usize,
        label_count: Option<usize>,
    ) -> (PathBuf, PathBuf) {
        let ip = dir.join("imgs");
        let lp = dir.join("lbls");
        let mut img = Vec::new();
        img.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
        img.extend_from_slice(&(n as u32).to_be_bytes());
        img.extend_from_slice(&(dims.0 as u32).to_be_bytes());
        img.extend_from_slice(&(dims.1 as u32).to_be_bytes());
        img.extend(std::iter::repeat_n(7u8, n * dims.0 * dims.1));
        img.truncate(img.len() - truncate_images);
        fs::write(&ip, img).unwrap();

        let nl = label_count.unwrap_or(n);
        let mut lbl = Vec::new();
        lbl.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
        lbl.extend_from_slice(&(nl as u32).to_be_bytes());
        lbl.extend((0..nl).map(|i| (i % 4) as u8));
        fs::write(&lp, lbl).unwrap();
        (ip, lp)
    }

    #[test]
    fn idx_roundtrip_is_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        let set = generate_geometric(40, (0.02f64).sqrt(), &mut stream(1, "geo")).unwrap();
        let ip = dir.path().join("i");
        let lp = dir.path().join("l");
        save_idx(&set, &ip, &lp).unwrap();
        let a = load_idx(&ip, &lp).unwrap();
        let b = load_idx(&ip, &lp).unwrap();
        assert_eq!(a.images, b.images);
        assert_eq!(a.labels, set.labels);
        assert_eq!(a.dims, GEOMETRIC_DIMS);
        // quantization to u8 and back stays within half a level
        for (orig, loaded) in set.images.iter().zip(&a.images) {
            for (&o, &l) in orig.iter().zip(loaded) {
                assert!((o - l).abs() <= 0.5 / 255.0 + 1e-12);
            }
        }
    }

    #[test]
    fn idx_bad_magic_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = write_idx_pair(dir.path(), 3, (2, 2), 0, None);
        let mut bytes = fs::read(&ip).unwrap();
        bytes[3] = 0x99;
        fs::write(&ip, bytes).unwrap();
        assert!(matches!(load_idx(&ip, &lp), Err(Error::Format(_))));
    }

    #[test]
    fn idx_truncation_is_a_length_error() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = write_idx_pair(dir.path(), 100, (2, 2), 4, None);
        assert!(matches!(load_idx(&ip, &lp), Err(Error::Data(_))));
    }

    #[test]
    fn idx_count_mismatch_is_a_consistency_error() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = write_idx_pair(dir.path(), 5, (2, 2), 0, Some(4));
        assert!(matches!(load_idx(&ip, &lp), Err(Error::Data(_))));
    }

    #[test]
    fn out_of_range_label_is_rejected_by_expect_classes() {
        let set = LabeledImageSet {
            images: vec![vec![0.0; 4]; 2],
            labels: vec![3, 10],
            class_count: 11,
            dims: (2, 2),
        };
        assert!(matches!(set.expect_classes(10), Err(Error::Data(_))));
    }

    #[test]
    fn zero_noise_reproduces_templates_exactly() {
        let set = generate_geometric(8, 0.0, &mut stream(0, "geo")).unwrap();
        for (img, &label) in set.images.iter().zip(&set.labels) {
            assert_eq!(img, &geometric_template(label as usize));
        }
    }

    #[test]
    fn default_geometric_set_is_balanced_and_clipped() {
        let set = generate_geometric(7100, (0.02f64).sqrt(), &mut stream(5, "geo")).unwrap();
        assert_eq!(set.len(), 7100);
        assert_eq!(set.class_count, 4);
        for c in 0..4u8 {
            assert_eq!(set.labels.iter().filter(|&&l| l == c).count(), 1775);
        }
        for img in &set.images {
            assert!(img.iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
    }

    #[test]
    fn templates_are_distinct() {
        for a in 0..4 {
            for b in (a + 1)..4 {
                assert_ne!(geometric_template(a), geometric_template(b));
            }
        }
    }

    #[test]
    fn balanced_split_counts() {
        let set = generate_geometric(7100, 0.1, &mut stream(2, "geo")).unwrap();
        let plan = SplitPlan::default();
        let split = balanced_split(&set, &plan, 42).unwrap();
        assert_eq!(split.batches.len(), 15);
        for batch in &split.batches {
            assert_eq!(batch.len(), 400);
            for c in 0..4u8 {
                let count = batch.iter().filter(|&&i| set.labels[i] == c).count();
                assert_eq!(count, 100, "4 classes in a 400 batch: 100 each");
            }
        }
        assert_eq!(split.val.len(), 100);
        assert_eq!(split.test.len(), 1000);
    }

    #[test]
    fn ten_class_batches_get_40_each() {
        let images = vec![vec![0.0; 4]; 8000];
        let labels: Vec<u8> = (0..8000).map(|i| (i % 10) as u8).collect();
        let set = LabeledImageSet { images, labels, class_count: 10, dims: (2, 2) };
        let plan = SplitPlan { n_train: 400, n_val: 50, n_test: 100, batch_size: 400, n_batches: 1, balance: true };
        let split = balanced_split(&set, &plan, 7).unwrap();
        for c in 0..10u8 {
            let count = split.batches[0].iter().filter(|&&i| set.labels[i] == c).count();
            assert_eq!(count, 40);
        }
    }

    #[test]
    fn same_seed_gives_identical_split_and_splits_are_disjoint() {
        let set = generate_geometric(7100, 0.1, &mut stream(3, "geo")).unwrap();
        let plan = SplitPlan::default();
        let a = balanced_split(&set, &plan, 9).unwrap();
        let b = balanced_split(&set, &plan, 9).unwrap();
        assert_eq!(a.batches, b.batches);
        assert_eq!(a.val, b.val);
        assert_eq!(a.test, b.test);

        let mut seen = HashSet::new();
        for idx in a.batches.iter().flatten().chain(&a.val).chain(&a.test) {
            assert!(seen.insert(*idx), "index {idx} appears twice");
        }
        assert_eq!(seen.len(), 7100);
    }

    #[test]
    fn insufficient_per_class_samples_is_a_capacity_error() {
        let set = generate_geometric(200, 0.1, &mut stream(4, "geo")).unwrap();
        let plan = SplitPlan::default();
        assert!(matches!(balanced_split(&set, &plan, 1), Err(Error::Data(_))));
    }

    #[test]
    fn uneven_batch_balance_differs_by_at_most_one() {
        let images = vec![vec![0.0; 4]; 900];
        let labels: Vec<u8> = (0..900).map(|i| (i % 7) as u8).collect();
        let set = LabeledImageSet { images, labels, class_count: 7, dims: (2, 2) };
        let plan = SplitPlan { n_train: 300, n_val: 30, n_test: 50, batch_size: 100, n_batches: 3, balance: true };
        let split = balanced_split(&set, &plan, 11).unwrap();
        for batch in &split.batches {
            let counts: Vec<usize> =
                (0..7u8).map(|c| batch.iter().filter(|&&i| set.labels[i] == c).count()).collect();
            let max = counts.iter().max().unwrap();
            let min = counts.iter().min().unwrap();
            assert!(max - min <= 1, "counts {counts:?}");
        }
    }
}
