use std::collections::BTreeMap;
use std::ops::Deref;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use log::{debug, info, warn};

use super::{activate, parse_ply, ActivatedPrimitives, ModelError};

/// Default idle time after which an unreferenced model is unloaded.
pub const DEFAULT_EVICTION_TIMEOUT: Duration = Duration::from_secs(300);

/// Monotonic time source, swappable so tests can run an accelerated clock.
pub trait Clock: Send + Sync + 'static {
    fn now(&self) -> Instant;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Instant {
        Instant::now()
    }
}

/// A clock that only moves when told to.
#[derive(Debug)]
pub struct ManualClock {
    base: Instant,
    offset: Mutex<Duration>,
}

impl Default for ManualClock {
    fn default() -> Self {
        Self {
            base: Instant::now(),
            offset: Mutex::new(Duration::ZERO),
        }
    }
}

impl ManualClock {
    pub fn advance(&self, by: Duration) {
        *self.offset.lock().unwrap() += by;
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Instant {
        self.base + *self.offset.lock().unwrap()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelState {
    Unloaded,
    Loading,
    Loaded,
}

impl ModelState {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Unloaded => "unloaded",
            Self::Loading => "loading",
            Self::Loaded => "loaded",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModelRecord {
    pub id: String,
    pub name: String,
    pub directory_path: PathBuf,
    pub ply_path: PathBuf,
    pub preview_path: Option<PathBuf>,
    pub state: ModelState,
    pub last_access: Option<Instant>,
    pub ref_count: usize,
}

impl ModelRecord {
    pub fn new(id: impl Into<String>, ply_path: impl Into<PathBuf>) -> Self {
        let id = id.into();
        let ply_path = ply_path.into();
        Self {
            name: id.clone(),
            directory_path: ply_path.parent().map(Path::to_path_buf).unwrap_or_default(),
            id,
            ply_path,
            preview_path: None,
            state: ModelState::Unloaded,
            last_access: None,
            ref_count: 0,
        }
    }
}

/// Finds one model per subdirectory of `root`.
///
/// A subdirectory qualifies if it holds `point_cloud.ply`, or exactly one
/// other `.ply` file. `preview.jpg` is picked up when present.
pub fn scan_model_directory(root: impl AsRef<Path>) -> Result<Vec<ModelRecord>, ModelError> {
    let root = root.as_ref();
    if !root.is_dir() {
        return Err(ModelError::RootNotFound(root.display().to_string()));
    }
    let mut records = Vec::new();
    for entry in std::fs::read_dir(root)? {
        let entry = match entry {
            Ok(e) => e,
            Err(e) => {
                warn!("skipping unreadable entry in {}: {e}", root.display());
                continue;
            }
        };
        let dir = entry.path();
        if !dir.is_dir() {
            continue;
        }
        let Some(id) = dir.file_name().and_then(|n| n.to_str()).map(str::to_owned) else {
            warn!("skipping non UTF-8 model directory {}", dir.display());
            continue;
        };
        let listing = match std::fs::read_dir(&dir) {
            Ok(l) => l,
            Err(e) => {
                warn!("skipping unreadable model directory {}: {e}", dir.display());
                continue;
            }
        };
        let mut plys: Vec<PathBuf> = listing
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("ply")))
            .collect();
        plys.sort();
        let canonical = dir.join("point_cloud.ply");
        let ply = if plys.contains(&canonical) {
            canonical
        } else if plys.len() == 1 {
            plys.remove(0)
        } else {
            if plys.len() > 1 {
                warn!("skipping {}: several .ply files and no point_cloud.ply", dir.display());
            }
            continue;
        };
        let mut record = ModelRecord::new(id, ply);
        record.directory_path = dir.clone();
        let preview = dir.join("preview.jpg");
        record.preview_path = preview.is_file().then_some(preview);
        records.push(record);
    }
    records.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(records)
}

type Loader = dyn Fn(&Path) -> Result<ActivatedPrimitives, ModelError> + Send + Sync;

struct Entry {
    record: ModelRecord,
    prims: Option<Arc<ActivatedPrimitives>>,
}

struct Inner {
    entries: Mutex<BTreeMap<String, Entry>>,
    load_done: Condvar,
    eviction_timeout: Duration,
    clock: Arc<dyn Clock>,
    loader: Box<Loader>,
    loads: AtomicU64,
}

/// Shared registry of scene models.
///
/// Models load lazily on first acquire, stay resident while referenced and
/// are unloaded by [`ModelRegistry::evict_inactive`] once idle for longer
/// than the eviction timeout. Cloning yields another handle to the same
/// registry.
#[derive(Clone)]
pub struct ModelRegistry {
    inner: Arc<Inner>,
}

impl std::fmt::Debug for ModelRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModelRegistry")
            .field("models", &self.records().len())
            .field("eviction_timeout", &self.inner.eviction_timeout)
            .finish()
    }
}

fn load_from_disk(path: &Path) -> Result<ActivatedPrimitives, ModelError> {
    let bytes = std::fs::read(path)?;
    activate(&parse_ply(&bytes)?)
}

impl ModelRegistry {
    pub fn new(records: Vec<ModelRecord>) -> Self {
        Self::with_options(records, DEFAULT_EVICTION_TIMEOUT, Arc::new(SystemClock))
    }

    pub fn with_options(
        records: Vec<ModelRecord>,
        eviction_timeout: Duration,
        clock: Arc<dyn Clock>,
    ) -> Self {
        Self::with_loader(records, eviction_timeout, clock, load_from_disk)
    }

    /// Like [`ModelRegistry::with_options`] but with a custom loader in
    /// place of reading and parsing the PLY file.
    pub fn with_loader(
        records: Vec<ModelRecord>,
        eviction_timeout: Duration,
        clock: Arc<dyn Clock>,
        loader: impl Fn(&Path) -> Result<ActivatedPrimitives, ModelError> + Send + Sync + 'static,
    ) -> Self {
        let entries = records
            .into_iter()
            .map(|mut record| {
                record.state = ModelState::Unloaded;
                record.ref_count = 0;
                (record.id.clone(), Entry { record, prims: None })
            })
            .collect();
        Self {
            inner: Arc::new(Inner {
                entries: Mutex::new(entries),
                load_done: Condvar::new(),
                eviction_timeout,
                clock,
                loader: Box::new(loader),
                loads: AtomicU64::new(0),
            }),
        }
    }

    /// Scans `root` and registers every model found.
    pub fn open(root: impl AsRef<Path>, eviction_timeout: Duration) -> Result<Self, ModelError> {
        let records = scan_model_directory(root)?;
        Ok(Self::with_options(records, eviction_timeout, Arc::new(SystemClock)))
    }

    fn lock(&self) -> MutexGuard<'_, BTreeMap<String, Entry>> {
        self.inner.entries.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn eviction_timeout(&self) -> Duration {
        self.inner.eviction_timeout
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.inner.clock
    }

    /// Snapshot of all records in id order.
    pub fn records(&self) -> Vec<ModelRecord> {
        self.lock().values().map(|e| e.record.clone()).collect()
    }

    pub fn record(&self, id: &str) -> Option<ModelRecord> {
        self.lock().get(id).map(|e| e.record.clone())
    }

    pub fn loaded_ids(&self) -> Vec<String> {
        self.lock()
            .values()
            .filter(|e| e.record.state == ModelState::Loaded)
            .map(|e| e.record.id.clone())
            .collect()
    }

    /// Number of times the loader has run.
    pub fn load_count(&self) -> u64 {
        self.inner.loads.load(Ordering::SeqCst)
    }

    /// Returns a lease on the model's primitives, loading them first if
    /// needed. Concurrent acquirers of an unloaded model share one load.
    pub fn acquire(&self, id: &str) -> Result<ModelLease, ModelError> {
        let mut map = self.lock();
        loop {
            let entry = map
                .get_mut(id)
                .ok_or_else(|| ModelError::UnknownModel(id.to_owned()))?;
            match entry.record.state {
                ModelState::Loaded => {
                    entry.record.ref_count += 1;
                    entry.record.last_access = Some(self.inner.clock.now());
                    let prims = entry.prims.clone().expect("loaded entry holds primitives");
                    return Ok(ModelLease::new(self.clone(), id, prims));
                }
                ModelState::Loading => {
                    map = self
                        .inner
                        .load_done
                        .wait(map)
                        .unwrap_or_else(|e| e.into_inner());
                }
                ModelState::Unloaded => {
                    entry.record.state = ModelState::Loading;
                    let path = entry.record.ply_path.clone();
                    drop(map);

                    debug!("loading model {id} from {}", path.display());
                    let started = Instant::now();
                    self.inner.loads.fetch_add(1, Ordering::SeqCst);
                    let result = catch_unwind(AssertUnwindSafe(|| (self.inner.loader)(&path)))
                        .unwrap_or_else(|_| {
                            Err(ModelError::LoadFailed {
                                id: id.to_owned(),
                                reason: "loader panicked".into(),
                            })
                        });

                    map = self.lock();
                    let entry = map.get_mut(id).expect("records are never removed");
                    let outcome = match result {
                        Ok(prims) => {
                            info!(
                                "loaded model {id}: {} gaussians in {:.1} ms",
                                prims.len(),
                                started.elapsed().as_secs_f64() * 1e3
                            );
                            let prims = Arc::new(prims);
                            entry.prims = Some(prims.clone());
                            entry.record.state = ModelState::Loaded;
                            entry.record.ref_count += 1;
                            entry.record.last_access = Some(self.inner.clock.now());
                            Ok(ModelLease::new(self.clone(), id, prims))
                        }
                        Err(err) => {
                            warn!("failed to load model {id}: {err}");
                            entry.record.state = ModelState::Unloaded;
                            Err(match err {
                                e @ ModelError::LoadFailed { .. } => e,
                                e => ModelError::LoadFailed {
                                    id: id.to_owned(),
                                    reason: e.to_string(),
                                },
                            })
                        }
                    };
                    self.inner.load_done.notify_all();
                    return outcome;
                }
            }
        }
    }

    /// Drops one reference. Releasing an unreferenced model is a bug in the
    /// caller and is reported as [`ModelError::UnderflowRelease`].
    pub fn release(&self, id: &str) -> Result<(), ModelError> {
        let mut map = self.lock();
        let entry = map
            .get_mut(id)
            .ok_or_else(|| ModelError::UnknownModel(id.to_owned()))?;
        if entry.record.ref_count == 0 {
            return Err(ModelError::UnderflowRelease(id.to_owned()));
        }
        entry.record.ref_count -= 1;
        entry.record.last_access = Some(self.inner.clock.now());
        Ok(())
    }

    /// Loads a model without holding a reference to it.
    pub fn load(&self, id: &str) -> Result<ModelState, ModelError> {
        self.acquire(id)?.release()?;
        Ok(ModelState::Loaded)
    }

    /// Unloads every idle model whose last access is older than the
    /// eviction timeout relative to `now`. Returns the evicted ids.
    pub fn evict_inactive(&self, now: Instant) -> Vec<String> {
        let timeout = self.inner.eviction_timeout;
        let mut evicted = Vec::new();
        for entry in self.lock().values_mut() {
            let idle = entry
                .record
                .last_access
                .map(|t| now.saturating_duration_since(t) > timeout)
                .unwrap_or(true);
            if entry.record.state == ModelState::Loaded && entry.record.ref_count == 0 && idle {
                entry.prims = None;
                entry.record.state = ModelState::Unloaded;
                evicted.push(entry.record.id.clone());
            }
        }
        if !evicted.is_empty() {
            info!("evicted idle models: {}", evicted.join(", "));
        }
        evicted
    }

    /// [`ModelRegistry::evict_inactive`] against the registry's own clock.
    pub fn evict_due(&self) -> Vec<String> {
        self.evict_inactive(self.inner.clock.now())
    }

    /// Unloads every unreferenced model regardless of age.
    pub fn unload_idle(&self) -> Vec<String> {
        let mut unloaded = Vec::new();
        for entry in self.lock().values_mut() {
            if entry.record.state == ModelState::Loaded && entry.record.ref_count == 0 {
                entry.prims = None;
                entry.record.state = ModelState::Unloaded;
                unloaded.push(entry.record.id.clone());
            }
        }
        unloaded
    }
}

/// A counted reference to a loaded model. Dropping it releases the reference.
pub struct ModelLease {
    registry: ModelRegistry,
    id: String,
    prims: Arc<ActivatedPrimitives>,
    released: bool,
}

impl ModelLease {
    fn new(registry: ModelRegistry, id: &str, prims: Arc<ActivatedPrimitives>) -> Self {
        Self {
            registry,
            id: id.to_owned(),
            prims,
            released: false,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn primitives(&self) -> &Arc<ActivatedPrimitives> {
        &self.prims
    }

    pub fn release(mut self) -> Result<(), ModelError> {
        self.released = true;
        self.registry.release(&self.id)
    }
}

impl Deref for ModelLease {
    type Target = ActivatedPrimitives;

    fn deref(&self) -> &ActivatedPrimitives {
        &self.prims
    }
}

impl Drop for ModelLease {
    fn drop(&mut self) {
        if !self.released {
            if let Err(e) = self.registry.release(&self.id) {
                debug_assert!(false, "lease release failed: {e}");
                warn!("lease release failed: {e}");
            }
        }
    }
}

impl std::fmt::Debug for ModelLease {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModelLease")
            .field("id", &self.id)
            .field("gaussians", &self.prims.len())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{write_ply, GaussianPrimitiveSet};
    use std::sync::Barrier;

    fn tiny_set() -> GaussianPrimitiveSet {
        let mut set = GaussianPrimitiveSet::with_capacity(1);
        set.means.push([0.0, 0.0, 5.0]);
        set.log_scales.push([0.0; 3]);
        set.quaternions.push([1.0, 0.0, 0.0, 0.0]);
        set.opacity_logits.push(0.0);
        set.sh_coeffs.push([[0.0; 3]; 16]);
        set
    }

    fn fixture_root(ids: &[&str]) -> tempfile::TempDir {
        let root = tempfile::tempdir().unwrap();
        for id in ids {
            let dir = root.path().join(id);
            std::fs::create_dir(&dir).unwrap();
            std::fs::write(dir.join("point_cloud.ply"), write_ply(&tiny_set(), 0)).unwrap();
        }
        root
    }

    fn registry(ids: &[&str], clock: Arc<ManualClock>) -> (tempfile::TempDir, ModelRegistry) {
        let root = fixture_root(ids);
        let records = scan_model_directory(root.path()).unwrap();
        let reg = ModelRegistry::with_options(records, Duration::from_secs(300), clock);
        (root, reg)
    }

    #[test]
    fn scan_empty_root() {
        let root = tempfile::tempdir().unwrap();
        assert!(scan_model_directory(root.path()).unwrap().is_empty());
    }

    #[test]
    fn scan_missing_root() {
        let err = scan_model_directory("/definitely/not/here").unwrap_err();
        assert!(matches!(err, ModelError::RootNotFound(_)));
    }

    #[test]
    fn scan_finds_models_in_order() {
        let root = fixture_root(&["truck", "train"]);
        std::fs::create_dir(root.path().join("empty")).unwrap();
        let single = root.path().join("bonsai");
        std::fs::create_dir(&single).unwrap();
        std::fs::write(single.join("scene.ply"), write_ply(&tiny_set(), 0)).unwrap();
        std::fs::write(single.join("preview.jpg"), b"jpg").unwrap();

        let records = scan_model_directory(root.path()).unwrap();
        let ids: Vec<_> = records.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, ["bonsai", "train", "truck"]);
        assert!(records.iter().all(|r| r.state == ModelState::Unloaded));
        assert!(records[0].ply_path.ends_with("scene.ply"));
        assert!(records[0].preview_path.is_some());
        assert!(records[1].preview_path.is_none());
    }

    #[test]
    fn acquire_unknown() {
        let (_root, reg) = registry(&[], Arc::new(ManualClock::default()));
        assert!(matches!(reg.acquire("x"), Err(ModelError::UnknownModel(_))));
    }

    #[test]
    fn acquire_release_counts() {
        let (_root, reg) = registry(&["train"], Arc::new(ManualClock::default()));
        let a = reg.acquire("train").unwrap();
        let b = reg.acquire("train").unwrap();
        assert_eq!(reg.record("train").unwrap().ref_count, 2);
        a.release().unwrap();
        assert_eq!(reg.record("train").unwrap().ref_count, 1);
        drop(b);
        let rec = reg.record("train").unwrap();
        assert_eq!(rec.ref_count, 0);
        assert_eq!(rec.state, ModelState::Loaded);
        assert_eq!(reg.load_count(), 1);
        assert!(matches!(reg.release("train"), Err(ModelError::UnderflowRelease(_))));
    }

    #[test]
    fn concurrent_acquire_loads_once() {
        let loads = Arc::new(AtomicU64::new(0));
        let counter = loads.clone();
        let reg = ModelRegistry::with_loader(
            vec![ModelRecord::new("m", "/unused.ply")],
            DEFAULT_EVICTION_TIMEOUT,
            Arc::new(SystemClock),
            move |_| {
                counter.fetch_add(1, Ordering::SeqCst);
                std::thread::sleep(Duration::from_millis(50));
                activate(&tiny_set())
            },
        );
        let barrier = Arc::new(Barrier::new(2));
        let leases: Vec<_> = (0..2)
            .map(|_| {
                let reg = reg.clone();
                let barrier = barrier.clone();
                std::thread::spawn(move || {
                    barrier.wait();
                    reg.acquire("m").unwrap()
                })
            })
            .collect::<Vec<_>>()
            .into_iter()
            .map(|h| h.join().unwrap())
            .collect();
        assert_eq!(loads.load(Ordering::SeqCst), 1);
        assert_eq!(reg.record("m").unwrap().ref_count, 2);
        assert!(Arc::ptr_eq(leases[0].primitives(), leases[1].primitives()));
    }

    #[test]
    fn failed_load_returns_to_unloaded() {
        let root = tempfile::tempdir().unwrap();
        let dir = root.path().join("bad");
        std::fs::create_dir(&dir).unwrap();
        let mut bytes = write_ply(&tiny_set(), 0);
        bytes.truncate(bytes.len() - 4);
        std::fs::write(dir.join("point_cloud.ply"), bytes).unwrap();
        let reg = ModelRegistry::new(scan_model_directory(root.path()).unwrap());
        match reg.acquire("bad") {
            Err(ModelError::LoadFailed { reason, .. }) => assert!(reason.contains("truncated")),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(reg.record("bad").unwrap().state, ModelState::Unloaded);
    }

    #[test]
    fn eviction_rules() {
        let clock = Arc::new(ManualClock::default());
        let (_root, reg) = registry(&["idle", "busy", "fresh"], clock.clone());
        reg.load("idle").unwrap();
        let busy = reg.acquire("busy").unwrap();
        clock.advance(Duration::from_secs(301));
        reg.load("fresh").unwrap();
        clock.advance(Duration::from_secs(10));

        assert_eq!(reg.evict_due(), ["idle"]);
        assert_eq!(reg.record("idle").unwrap().state, ModelState::Unloaded);
        assert_eq!(reg.record("busy").unwrap().state, ModelState::Loaded);
        assert_eq!(reg.record("fresh").unwrap().state, ModelState::Loaded);
        assert!(reg.evict_due().is_empty());
        drop(busy);
    }

    #[test]
    fn eviction_boundary() {
        let clock = Arc::new(ManualClock::default());
        let (_root, reg) = registry(&["m"], clock.clone());
        reg.load("m").unwrap();
        clock.advance(Duration::from_secs(300));
        assert!(reg.evict_due().is_empty(), "exactly at the timeout is not expired");
        clock.advance(Duration::from_secs(1));
        assert_eq!(reg.evict_due(), ["m"]);
    }
}
