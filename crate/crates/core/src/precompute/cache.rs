//! Binary cache for near-field plans and precomputed weights.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic   8 bytes  "RPWCACHE"
//! version u32      1
//! key     atlas hash [32] · k f64 · variant u8 · n_u u32 · n_v u32 ·
//!         n_beta u32 · p_sing u32 · delta f64 · n_patches u64 · n_nodes u64
//! plan    per patch: count u64, then per target:
//!         node u64 · node_distance f64 · u f64 · v f64 · distance f64
//! weights per patch: len u64, then len × (re f64 · im f64)
//! digest  32 bytes sha-256 of everything above
//! ```

use super::{NearFieldPlan, NearTarget, PatchNearSet, PatchWeightSet, PrecomputedWeights, Projection};
use crate::error::Error;
use crate::geometry::{SurfaceDiscretization, SurfaceMap};
use crate::kernel::{KernelKind, KernelVariant};
use crate::maps::EdgeFlag;
use crate::Result;
use num_complex::Complex64;
use sha2::{Digest, Sha256};
use std::path::Path;

const MAGIC: &[u8; 8] = b"RPWCACHE";
const VERSION: u32 = 1;

/// Everything a weight set depends on; caches are rejected unless all fields
/// match.
#[derive(Debug, Clone, PartialEq)]
pub struct CacheKey {
    pub atlas_hash: [u8; 32],
    pub k: f64,
    pub variant: KernelVariant,
    pub n_u: u32,
    pub n_v: u32,
    pub n_beta: u32,
    pub p_sing: u32,
    pub delta: f64,
    pub n_patches: u64,
    pub n_nodes: u64,
}

impl CacheKey {
    pub fn new(
        disc: &SurfaceDiscretization,
        kind: KernelKind,
        delta: f64,
        n_beta: usize,
        p_sing: u32,
    ) -> Self {
        CacheKey {
            atlas_hash: atlas_hash(disc),
            k: kind.k,
            variant: kind.variant,
            n_u: disc.n_u as u32,
            n_v: disc.n_v as u32,
            n_beta: n_beta as u32,
            p_sing,
            delta,
            n_patches: disc.patches.len() as u64,
            n_nodes: disc.node_count() as u64,
        }
    }

    /// Hex digest used to name cache files.
    pub fn file_stem(&self) -> String {
        let mut h = Sha256::new();
        let mut bytes = Vec::new();
        self.write_to(&mut bytes);
        h.update(&bytes);
        let digest = h.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    fn write_to(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.atlas_hash);
        out.extend_from_slice(&self.k.to_le_bytes());
        out.push(match self.variant {
            KernelVariant::CombinedField => 0,
            KernelVariant::SingleLayer => 1,
        });
        out.extend_from_slice(&self.n_u.to_le_bytes());
        out.extend_from_slice(&self.n_v.to_le_bytes());
        out.extend_from_slice(&self.n_beta.to_le_bytes());
        out.extend_from_slice(&self.p_sing.to_le_bytes());
        out.extend_from_slice(&self.delta.to_le_bytes());
        out.extend_from_slice(&self.n_patches.to_le_bytes());
        out.extend_from_slice(&self.n_nodes.to_le_bytes());
    }

    fn read_from(r: &mut Reader) -> Result<Self> {
        let mut atlas_hash = [0u8; 32];
        atlas_hash.copy_from_slice(r.take(32)?);
        Ok(CacheKey {
            atlas_hash,
            k: r.f64()?,
            variant: match r.u8()? {
                0 => KernelVariant::CombinedField,
                1 => KernelVariant::SingleLayer,
                other => {
                    return Err(Error::CacheCorrupt(format!(
                        "unknown kernel variant tag {other}"
                    )))
                }
            },
            n_u: r.u32()?,
            n_v: r.u32()?,
            n_beta: r.u32()?,
            p_sing: r.u32()?,
            delta: r.f64()?,
            n_patches: r.u64()?,
            n_nodes: r.u64()?,
        })
    }

    fn differing_fields(&self, other: &CacheKey) -> Vec<String> {
        let mut fields = Vec::new();
        if self.atlas_hash != other.atlas_hash {
            fields.push("geometry".into());
        }
        if self.k.to_bits() != other.k.to_bits() {
            fields.push(format!("k ({} vs {})", other.k, self.k));
        }
        if self.variant != other.variant {
            fields.push("formulation".into());
        }
        if self.n_u != other.n_u || self.n_v != other.n_v {
            fields.push(format!(
                "node counts ({}x{} vs {}x{})",
                other.n_u, other.n_v, self.n_u, self.n_v
            ));
        }
        if self.n_beta != other.n_beta {
            fields.push(format!("n_beta ({} vs {})", other.n_beta, self.n_beta));
        }
        if self.p_sing != other.p_sing {
            fields.push(format!("p_sing ({} vs {})", other.p_sing, self.p_sing));
        }
        if self.delta.to_bits() != other.delta.to_bits() {
            fields.push(format!("delta ({} vs {})", other.delta, self.delta));
        }
        if self.n_patches != other.n_patches {
            fields.push("patch count".into());
        }
        if self.n_nodes != other.n_nodes {
            fields.push("node count".into());
        }
        fields
    }
}

/// Canonical hash of the atlas geometry: maps, boxes, flags, grading orders.
fn atlas_hash(disc: &SurfaceDiscretization) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update([disc.atlas.closed as u8]);
    h.update((disc.atlas.patches.len() as u64).to_le_bytes());
    for p in &disc.atlas.patches {
        match p.map.as_ref() {
            SurfaceMap::CubeFace { face, half } => {
                h.update([0u8, *face]);
                h.update(half.to_le_bytes());
            }
            SurfaceMap::SphereFace { face, radius } => {
                h.update([1u8, *face]);
                h.update(radius.to_le_bytes());
            }
            SurfaceMap::DiskCenter { half } => {
                h.update([2u8]);
                h.update(half.to_le_bytes());
            }
            SurfaceMap::DiskSector {
                quadrant,
                half,
                radius,
            } => {
                h.update([3u8, *quadrant]);
                h.update(half.to_le_bytes());
                h.update(radius.to_le_bytes());
            }
            SurfaceMap::Bezier(b) => {
                h.update([4u8]);
                h.update((b.d_u as u64).to_le_bytes());
                h.update((b.d_v as u64).to_le_bytes());
                for c in &b.ctrl {
                    for x in c {
                        h.update(x.to_le_bytes());
                    }
                }
            }
        }
        for x in [p.sub.uc, p.sub.uh, p.sub.vc, p.sub.vh] {
            h.update(x.to_le_bytes());
        }
        h.update([flag_tag(p.edge_u), flag_tag(p.edge_v)]);
        h.update(p.cov_p.to_le_bytes());
    }
    h.finalize().into()
}

fn flag_tag(f: EdgeFlag) -> u8 {
    match f {
        EdgeFlag::None => 0,
        EdgeFlag::BothEnds => 1,
        EdgeFlag::LowEndOnly => 2,
        EdgeFlag::HighEndOnly => 3,
    }
}

/// Serialize plan and weights under the given key.
pub fn cache_store(
    path: impl AsRef<Path>,
    key: &CacheKey,
    plan: &NearFieldPlan,
    weights: &PrecomputedWeights,
) -> Result<()> {
    let mut bytes = Vec::new();
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&VERSION.to_le_bytes());
    key.write_to(&mut bytes);
    bytes.extend_from_slice(&plan.delta.to_le_bytes());
    for set in &plan.near {
        bytes.extend_from_slice(&(set.targets.len() as u64).to_le_bytes());
        for t in &set.targets {
            let proj = t.projection.unwrap_or(Projection {
                u: f64::NAN,
                v: f64::NAN,
                distance: f64::NAN,
            });
            bytes.extend_from_slice(&(t.node as u64).to_le_bytes());
            bytes.extend_from_slice(&t.node_distance.to_le_bytes());
            bytes.extend_from_slice(&proj.u.to_le_bytes());
            bytes.extend_from_slice(&proj.v.to_le_bytes());
            bytes.extend_from_slice(&proj.distance.to_le_bytes());
        }
    }
    for ws in &weights.patches {
        bytes.extend_from_slice(&(ws.data.len() as u64).to_le_bytes());
        for c in &ws.data {
            bytes.extend_from_slice(&c.re.to_le_bytes());
            bytes.extend_from_slice(&c.im.to_le_bytes());
        }
    }
    let mut h = Sha256::new();
    h.update(&bytes);
    let digest = h.finalize();
    bytes.extend_from_slice(&digest);
    std::fs::write(path, bytes)?;
    Ok(())
}

/// Load plan and weights, verifying integrity and that the stored key equals
/// `expected` field for field.
pub fn cache_load(
    path: impl AsRef<Path>,
    expected: &CacheKey,
) -> Result<(NearFieldPlan, PrecomputedWeights)> {
    let bytes = std::fs::read(path)?;
    if bytes.len() < MAGIC.len() + 4 + 32 {
        return Err(Error::CacheCorrupt("file too short".into()));
    }
    let (body, stored_digest) = bytes.split_at(bytes.len() - 32);
    let mut h = Sha256::new();
    h.update(body);
    if h.finalize().as_slice() != stored_digest {
        return Err(Error::CacheCorrupt("checksum mismatch".into()));
    }

    let mut r = Reader { buf: body, at: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::CacheCorrupt("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::CacheCorrupt(format!(
            "unsupported version {version}"
        )));
    }
    let key = CacheKey::read_from(&mut r)?;
    let mismatches = expected.differing_fields(&key);
    if !mismatches.is_empty() {
        return Err(Error::CacheMismatch { fields: mismatches });
    }

    let delta = r.f64()?;
    let mut near = Vec::with_capacity(key.n_patches as usize);
    for _ in 0..key.n_patches {
        let count = r.u64()? as usize;
        let mut targets = Vec::with_capacity(count);
        for _ in 0..count {
            let node = r.u64()? as usize;
            let node_distance = r.f64()?;
            let u = r.f64()?;
            let v = r.f64()?;
            let distance = r.f64()?;
            targets.push(NearTarget {
                node,
                node_distance,
                projection: Some(Projection { u, v, distance }),
            });
        }
        near.push(PatchNearSet { targets });
    }
    let target_patches = NearFieldPlan::rebuild_reverse_index(&near, key.n_nodes as usize);
    let plan = NearFieldPlan {
        delta,
        near,
        target_patches,
    };

    let stride = (key.n_u * key.n_v) as usize;
    let mut patches = Vec::with_capacity(key.n_patches as usize);
    for set in &plan.near {
        let len = r.u64()? as usize;
        if len != set.targets.len() * stride {
            return Err(Error::CacheCorrupt("weight block size mismatch".into()));
        }
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            let re = r.f64()?;
            let im = r.f64()?;
            data.push(Complex64::new(re, im));
        }
        patches.push(PatchWeightSet { stride, data });
    }
    if r.at != body.len() {
        return Err(Error::CacheCorrupt("trailing bytes".into()));
    }

    let weights = PrecomputedWeights {
        kind: KernelKind {
            variant: key.variant,
            k: key.k,
        },
        n_u: key.n_u as usize,
        n_v: key.n_v as usize,
        n_beta: key.n_beta as usize,
        p_sing: key.p_sing,
        patches,
    };
    Ok((plan, weights))
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.at + n > self.buf.len() {
            return Err(Error::CacheCorrupt("unexpected end of file".into()));
        }
        let s = &self.buf[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
