//! Binary snapshots of fields, increment ladders and solver checkpoints.
//!
//! A field record is `magic "PPSF" | version u16 | L f64 | N u32 | kind u8`
//! followed by the coefficients for `n1, n2 = -N/2 .. N/2-1` in row-major
//! order as little-endian `(re, im)` pairs; vectors store the x block and then
//! the y block. A bundle (`"PPSB"`) is a list of named entries holding fields,
//! `i64` arrays or `key=value` text. Decoded grids use the default padding.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::noise::{LadderMeta, WienerIncrements};
use crate::schemes::PenaltyState;
use crate::spectral::{Field, Grid, SpectralScalar, SpectralVector};

const FIELD_MAGIC: &[u8; 4] = b"PPSF";
const BUNDLE_MAGIC: &[u8; 4] = b"PPSB";
const VERSION: u16 = 1;

const KIND_SCALAR: u8 = 0;
const KIND_VECTOR: u8 = 1;

const TAG_FIELD: u8 = 0;
const TAG_TICKS: u8 = 1;
const TAG_TEXT: u8 = 2;

#[derive(Clone, Debug, PartialEq)]
pub enum FieldSnapshot {
    Scalar(SpectralScalar),
    Vector(SpectralVector),
}

impl FieldSnapshot {
    pub fn grid(&self) -> Grid {
        match self {
            FieldSnapshot::Scalar(s) => *s.grid(),
            FieldSnapshot::Vector(v) => *v.grid(),
        }
    }

    pub fn into_scalar(self) -> Result<SpectralScalar> {
        match self {
            FieldSnapshot::Scalar(s) => Ok(s),
            FieldSnapshot::Vector(_) => Err(Error::Format("expected a scalar field".into())),
        }
    }

    pub fn into_vector(self) -> Result<SpectralVector> {
        match self {
            FieldSnapshot::Vector(v) => Ok(v),
            FieldSnapshot::Scalar(_) => Err(Error::Format("expected a vector field".into())),
        }
    }
}

impl From<SpectralScalar> for FieldSnapshot {
    fn from(s: SpectralScalar) -> Self {
        FieldSnapshot::Scalar(s)
    }
}

impl From<SpectralVector> for FieldSnapshot {
    fn from(v: SpectralVector) -> Self {
        FieldSnapshot::Vector(v)
    }
}

fn natural_order(grid: &Grid) -> impl Iterator<Item = usize> + '_ {
    let h = (grid.n() / 2) as i64;
    let n = grid.n() as i64;
    (-h..h).flat_map(move |n1| {
        (-h..h).map(move |n2| (n1.rem_euclid(n) * n + n2.rem_euclid(n)) as usize)
    })
}

fn put_scalar(out: &mut Vec<u8>, s: &SpectralScalar) {
    let c = s.coeffs();
    for idx in natural_order(s.grid()) {
        out.extend_from_slice(&c[idx].re.to_le_bytes());
        out.extend_from_slice(&c[idx].im.to_le_bytes());
    }
}

/// Encodes one field record.
pub fn encode_field(field: &FieldSnapshot) -> Vec<u8> {
    let g = field.grid();
    let comps = match field {
        FieldSnapshot::Scalar(_) => 1,
        FieldSnapshot::Vector(_) => 2,
    };
    let mut out = Vec::with_capacity(19 + comps * 16 * g.size());
    out.extend_from_slice(FIELD_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&g.length().to_le_bytes());
    out.extend_from_slice(&(g.n() as u32).to_le_bytes());
    match field {
        FieldSnapshot::Scalar(s) => {
            out.push(KIND_SCALAR);
            put_scalar(&mut out, s);
        }
        FieldSnapshot::Vector(v) => {
            out.push(KIND_VECTOR);
            put_scalar(&mut out, v.x());
            put_scalar(&mut out, v.y());
        }
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Cursor { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format("unexpected end of data".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const K: usize>(&mut self) -> Result<[u8; K]> {
        Ok(self.take(K)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn finished(&self) -> bool {
        self.pos == self.buf.len()
    }
}

fn get_scalar(cur: &mut Cursor<'_>, grid: Grid) -> Result<SpectralScalar> {
    let mut coeffs = vec![Complex64::default(); grid.size()];
    for idx in natural_order(&grid) {
        let re = cur.f64()?;
        let im = cur.f64()?;
        coeffs[idx] = Complex64::new(re, im);
    }
    let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    for (idx, c) in coeffs.iter().enumerate() {
        if !c.re.is_finite() || !c.im.is_finite() {
            return Err(Error::Format("non-finite coefficient".into()));
        }
        if grid.is_nyquist(idx) && *c != Complex64::default() {
            return Err(Error::Format("nonzero Nyquist coefficient".into()));
        }
        let mirror = coeffs[grid.conjugate_index(idx)];
        if (mirror - c.conj()).norm() > 1e-12 * scale {
            return Err(Error::Format("coefficients are not Hermitian".into()));
        }
    }
    Ok(SpectralScalar::from_raw(grid, coeffs))
}

fn field_from(cur: &mut Cursor<'_>) -> Result<FieldSnapshot> {
    if &cur.array::<4>()? != FIELD_MAGIC {
        return Err(Error::Format("bad field magic".into()));
    }
    let version = cur.u16()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let length = cur.f64()?;
    let n = cur.u32()? as usize;
    let grid = Grid::new(length, n, Grid::DEFAULT_PAD)
        .map_err(|e| Error::Format(format!("bad grid header: {e}")))?;
    match cur.u8()? {
        KIND_SCALAR => Ok(FieldSnapshot::Scalar(get_scalar(cur, grid)?)),
        KIND_VECTOR => {
            let x = get_scalar(cur, grid)?;
            let y = get_scalar(cur, grid)?;
            Ok(FieldSnapshot::Vector(SpectralVector::from_parts(x, y)))
        }
        k => Err(Error::Format(format!("unknown field kind {k}"))),
    }
}

/// Decodes one field record; trailing bytes are an error.
pub fn decode_field(bytes: &[u8]) -> Result<FieldSnapshot> {
    let mut cur = Cursor::new(bytes);
    let f = field_from(&mut cur)?;
    if !cur.finished() {
        return Err(Error::Format("trailing bytes after field".into()));
    }
    Ok(f)
}

pub fn save_field(path: impl AsRef<Path>, field: &FieldSnapshot) -> Result<()> {
    write_bytes(path.as_ref(), &encode_field(field))
}

pub fn load_field(path: impl AsRef<Path>) -> Result<FieldSnapshot> {
    decode_field(&read_bytes(path.as_ref())?)
}

/// Plain-text listing, one `n1 n2 re im` line per mode in natural order.
pub fn text_dump(field: &FieldSnapshot) -> String {
    let mut out = String::new();
    let mut dump = |label: Option<&str>, s: &SpectralScalar| {
        if let Some(l) = label {
            out.push_str(&format!("# component {l}\n"));
        }
        let h = (s.grid().n() / 2) as i64;
        for n1 in -h..h {
            for n2 in -h..h {
                let c = s.coeff(n1, n2);
                out.push_str(&format!("{n1} {n2} {:.16e} {:.16e}\n", c.re, c.im));
            }
        }
    };
    match field {
        FieldSnapshot::Scalar(s) => dump(None, s),
        FieldSnapshot::Vector(v) => {
            dump(Some("x"), v.x());
            dump(Some("y"), v.y());
        }
    }
    out
}

/// Named entries of a bundle file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Bundle {
    pub text: BTreeMap<String, String>,
    pub fields: BTreeMap<String, FieldSnapshot>,
    pub ticks: BTreeMap<String, Vec<i64>>,
}

impl Bundle {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(BUNDLE_MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        let count = self.text.len() + self.fields.len() + self.ticks.len();
        out.extend_from_slice(&(count as u32).to_le_bytes());
        let mut entry = |name: &str, tag: u8, payload: Vec<u8>| {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(tag);
            out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
            out.extend_from_slice(&payload);
        };
        for (k, v) in &self.text {
            entry(k, TAG_TEXT, v.as_bytes().to_vec());
        }
        for (k, f) in &self.fields {
            entry(k, TAG_FIELD, encode_field(f));
        }
        for (k, t) in &self.ticks {
            entry(
                k,
                TAG_TICKS,
                t.iter().flat_map(|x| x.to_le_bytes()).collect(),
            );
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor::new(bytes);
        if &cur.array::<4>()? != BUNDLE_MAGIC {
            return Err(Error::Format("bad bundle magic".into()));
        }
        let version = cur.u16()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let count = cur.u32()?;
        let mut b = Bundle::default();
        for _ in 0..count {
            let len = cur.u16()? as usize;
            let name = std::str::from_utf8(cur.take(len)?)
                .map_err(|_| Error::Format("entry name is not UTF-8".into()))?
                .to_string();
            let tag = cur.u8()?;
            let size =
                usize::try_from(cur.u64()?).map_err(|_| Error::Format("entry too large".into()))?;
            let payload = cur.take(size)?;
            let dup = match tag {
                TAG_TEXT => {
                    let s = std::str::from_utf8(payload)
                        .map_err(|_| Error::Format("text entry is not UTF-8".into()))?;
                    b.text.insert(name.clone(), s.to_string()).is_some()
                }
                TAG_FIELD => b
                    .fields
                    .insert(name.clone(), decode_field(payload)?)
                    .is_some(),
                TAG_TICKS => {
                    if size % 8 != 0 {
                        return Err(Error::Format(format!("entry `{name}` has ragged length")));
                    }
                    let t = payload
                        .chunks_exact(8)
                        .map(|c| i64::from_le_bytes(c.try_into().expect("chunk of 8")))
                        .collect();
                    b.ticks.insert(name.clone(), t).is_some()
                }
                t => return Err(Error::Format(format!("unknown entry tag {t}"))),
            };
            if dup {
                return Err(Error::Format(format!("duplicate entry `{name}`")));
            }
        }
        if !cur.finished() {
            return Err(Error::Format("trailing bytes after bundle".into()));
        }
        Ok(b)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_bytes(path.as_ref(), &self.encode())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::decode(&read_bytes(path.as_ref())?)
    }

    fn text_value(&self, entry: &str, key: &str) -> Result<&str> {
        let body = self
            .text
            .get(entry)
            .ok_or_else(|| Error::Format(format!("missing entry `{entry}`")))?;
        body.lines()
            .filter_map(|l| l.split_once('='))
            .find(|(k, _)| *k == key)
            .map(|(_, v)| v)
            .ok_or_else(|| Error::Format(format!("missing key `{key}` in `{entry}`")))
    }

    fn parsed<T: std::str::FromStr>(&self, entry: &str, key: &str) -> Result<T> {
        let v = self.text_value(entry, key)?;
        v.parse()
            .map_err(|_| Error::Format(format!("bad value `{v}` for `{key}`")))
    }

    fn take_field(&mut self, name: &str) -> Result<FieldSnapshot> {
        self.fields
            .remove(name)
            .ok_or_else(|| Error::Format(format!("missing field `{name}`")))
    }
}

fn ladder_text(meta: &LadderMeta) -> String {
    format!(
        "base_seed={}\npath_index={}\nfine_steps={}\nfine_step_len={:e}\ncutoff={}\ngamma={:e}\n",
        meta.base_seed,
        meta.path_index,
        meta.fine_steps,
        meta.fine_step_len,
        meta.cutoff,
        meta.gamma
    )
}

fn ladder_meta(b: &Bundle, entry: &str) -> Result<LadderMeta> {
    Ok(LadderMeta {
        base_seed: b.parsed(entry, "base_seed")?,
        path_index: b.parsed(entry, "path_index")?,
        fine_steps: b.parsed(entry, "fine_steps")?,
        fine_step_len: b.parsed(entry, "fine_step_len")?,
        cutoff: b.parsed(entry, "cutoff")?,
        gamma: b.parsed(entry, "gamma")?,
    })
}

/// Stores an increment ladder with its provenance.
pub fn ladder_bundle(incs: &WienerIncrements) -> Bundle {
    let mut b = Bundle::default();
    let mut text = ladder_text(incs.meta());
    text.push_str(&format!(
        "factor={}\nchannels={}\n",
        incs.factor(),
        incs.channels()
    ));
    b.text.insert("ladder".into(), text);
    b.ticks.insert("ticks".into(), incs.ticks().to_vec());
    b
}

pub fn ladder_from_bundle(b: &Bundle) -> Result<WienerIncrements> {
    let meta = ladder_meta(b, "ladder")?;
    let ticks = b
        .ticks
        .get("ticks")
        .ok_or_else(|| Error::Format("missing entry `ticks`".into()))?
        .clone();
    WienerIncrements::from_parts(
        meta,
        b.parsed("ladder", "factor")?,
        b.parsed("ladder", "channels")?,
        ticks,
    )
}

/// Solver state at the end of a step plus the ladder that drives the run.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub state: PenaltyState,
    pub ladder: Option<LadderMeta>,
}

impl Checkpoint {
    pub fn to_bundle(&self) -> Bundle {
        let s = &self.state;
        let mut b = Bundle::default();
        b.text.insert("state".into(), format!("step={}\n", s.step));
        if let Some(meta) = &self.ladder {
            b.text.insert("ladder".into(), ladder_text(meta));
        }
        for (name, f) in [
            ("u", FieldSnapshot::from(s.u.clone())),
            ("phi", s.phi.clone().into()),
            ("p", s.p.clone().into()),
            ("u_tilde", s.u_tilde.clone().into()),
            ("p_tilde", s.p_tilde.clone().into()),
        ] {
            b.fields.insert(name.into(), f);
        }
        b
    }

    pub fn from_bundle(mut b: Bundle) -> Result<Self> {
        let step = b.parsed("state", "step")?;
        let ladder = if b.text.contains_key("ladder") {
            Some(ladder_meta(&b, "ladder")?)
        } else {
            None
        };
        let u = b.take_field("u")?.into_vector()?;
        let state = PenaltyState {
            phi: b.take_field("phi")?.into_scalar()?,
            p: b.take_field("p")?.into_scalar()?,
            u_tilde: b.take_field("u_tilde")?.into_vector()?,
            p_tilde: b.take_field("p_tilde")?.into_scalar()?,
            u,
            step,
        };
        let g = *state.u.grid();
        for other in [
            state.phi.grid(),
            state.p.grid(),
            state.u_tilde.grid(),
            state.p_tilde.grid(),
        ] {
            if *other != g {
                return Err(Error::Format("checkpoint fields on different grids".into()));
            }
        }
        Ok(Checkpoint { state, ladder })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_bundle().save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bundle(Bundle::load(path)?)
    }
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(bytes)?;
    w.flush()?;
    Ok(())
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut buf)?;
    Ok(buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::init::{random_scalar, random_solenoidal};
    use crate::noise::NoiseModel;

    fn grid() -> Grid {
        Grid::new(3.0, 8, 1.5).unwrap()
    }

    #[test]
    fn field_roundtrip_is_exact() {
        let s = random_scalar(grid(), 3, 1.0);
        let v = random_solenoidal(grid(), 4, 1.0, 2.0);
        for f in [FieldSnapshot::from(s), v.into()] {
            let bytes = encode_field(&f);
            assert_eq!(decode_field(&bytes).unwrap(), f);
        }
    }

    #[test]
    fn header_layout() {
        let f = FieldSnapshot::from(SpectralScalar::zeros(grid()));
        let bytes = encode_field(&f);
        assert_eq!(&bytes[..4], b"PPSF");
        assert_eq!(f64::from_le_bytes(bytes[6..14].try_into().unwrap()), 3.0);
        assert_eq!(u32::from_le_bytes(bytes[14..18].try_into().unwrap()), 8);
        assert_eq!(bytes[18], 0);
        assert_eq!(bytes.len(), 19 + 64 * 16);
    }

    #[test]
    fn natural_order_places_modes() {
        let mut s = SpectralScalar::zeros(grid());
        s.set_mode(1, -2, Complex64::new(0.5, 0.25)).unwrap();
        let bytes = encode_field(&s.into());
        // (n1, n2) = (1, -2) sits at row 1 + 4, column -2 + 4.
        let at = 19 + 16 * (5 * 8 + 2);
        assert_eq!(
            f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap()),
            0.5
        );
        let mirror = 19 + 16 * (3 * 8 + 6);
        assert_eq!(
            f64::from_le_bytes(bytes[mirror + 8..mirror + 16].try_into().unwrap()),
            -0.25
        );
    }

    #[test]
    fn corrupt_input_is_rejected() {
        let f = FieldSnapshot::from(random_scalar(grid(), 1, 1.0));
        let bytes = encode_field(&f);
        assert!(decode_field(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_field(&bad).is_err());
        let mut bad = bytes.clone();
        bad.push(0);
        assert!(decode_field(&bad).is_err());
        // break Hermitian symmetry of mode (1, 0)
        let mut bad = bytes;
        let at = 19 + 16 * (5 * 8 + 4);
        bad[at..at + 8].copy_from_slice(&7.0f64.to_le_bytes());
        assert!(matches!(decode_field(&bad), Err(Error::Format(_))));
    }

    #[test]
    fn text_dump_lists_every_mode() {
        let mut s = SpectralScalar::zeros(grid());
        s.set_mode(0, 1, Complex64::new(1.0, -2.0)).unwrap();
        let dump = text_dump(&s.into());
        assert_eq!(dump.lines().count(), 64);
        assert!(dump.contains("0 1 1.0000000000000000e0 -2.0000000000000000e0"));
        assert!(dump.contains("0 -1 1.0000000000000000e0 2.0000000000000000e0"));
    }

    #[test]
    fn ladder_roundtrip() {
        let g = Grid::periodic_2pi(8).unwrap();
        let model = NoiseModel::new(g, 2, 3.0).unwrap();
        let w = model.sample_increments(12, 0.01, 77, 3).unwrap();
        let coarse = w.coarsen(3).unwrap();
        for incs in [w, coarse] {
            let back = ladder_from_bundle(&Bundle::decode(&ladder_bundle(&incs).encode()).unwrap());
            assert_eq!(back.unwrap(), incs);
        }
    }

    #[test]
    fn checkpoint_file_roundtrip() {
        let g = grid();
        let mut state = PenaltyState::initial(random_solenoidal(g, 2, 1.0, 1.0));
        state.phi = random_scalar(g, 5, 1.0);
        state.p = random_scalar(g, 6, 1.0);
        state.step = 17;
        let ck = Checkpoint {
            state,
            ladder: Some(LadderMeta {
                base_seed: u64::MAX,
                path_index: 4,
                fine_steps: 1024,
                fine_step_len: 0.5 / 1024.0,
                cutoff: 8,
                gamma: 3.0,
            }),
        };
        let dir = std::env::temp_dir().join(format!("penproj-ck-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("state.bin");
        ck.save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap(), ck);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
