//! Receptive-field arithmetic for convolutional stacks.
//!
//! Maps any feature-map cell of any layer back to pixel space: the stride
//! between adjacent feature centers, the coordinate of the top-left center,
//! and the receptive-field extent. The recursions are
//!
//! ```text
//! S_i  = S_{i-1} * s_i                       (S_0 = 1)
//! x_i  = x_{i-1} + ((W_i - 1)/2 - P_i) * S_{i-1}
//! rf_i = rf_{i-1} + (W_i - 1) * S_{i-1}      (rf_0 = 1)
//! ```
//!
//! Coordinates follow the published table convention: 1-based pixels with
//! base `x_1 = (W_1 + 1)/2`, which deliberately ignores first-layer padding.
//! When the first layer pads, the true (padding-aware) center of every layer
//! sits exactly `P_1` pixels to the left of the convention value; the
//! support/interior computations below account for that, the reported
//! coordinates do not. Centers can be half-integral for even windows, so
//! they are carried as exact rationals.
//!
//! Layer indices in this module count only geometry-active layers (conv and
//! pool); rectification and normalization layers are geometry-neutral and
//! are skipped in tables and indexing.

use std::fmt;
use std::path::Path;

use thiserror::Error;

#[derive(Error, Debug)]
pub enum GeometryError {
    #[error("layer index {index} out of range 1..={count}")]
    LayerIndexOutOfRange { index: usize, count: usize },
    #[error("cell ({u}, {v}) outside layer extent {size}x{size}")]
    CellOutOfExtent { u: u32, v: u32, size: u32 },
    #[error("invalid net: {0}")]
    InvalidNet(String),
    #[error("netspec parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("failed to read netspec: {0}")]
    Io(#[from] std::io::Error),
}

// ---------------------------------------------------------------------------
// Exact rational coordinates
// ---------------------------------------------------------------------------

/// Exact rational in lowest terms with positive denominator. Feature centers
/// only ever need halves, but the type stays general.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Frac {
    num: i64,
    den: i64,
}

impl Frac {
    pub fn new(num: i64, den: i64) -> Frac {
        assert!(den != 0, "zero denominator");
        let sign = if den < 0 { -1 } else { 1 };
        let g = gcd(num.unsigned_abs(), den.unsigned_abs()) as i64;
        Frac {
            num: sign * num / g,
            den: sign * den / g,
        }
    }

    pub fn int(v: i64) -> Frac {
        Frac { num: v, den: 1 }
    }

    pub fn num(&self) -> i64 {
        self.num
    }

    pub fn den(&self) -> i64 {
        self.den
    }

    pub fn is_integer(&self) -> bool {
        self.den == 1
    }

    /// Exact integer value; `None` when fractional.
    pub fn to_i64(&self) -> Option<i64> {
        self.is_integer().then_some(self.num)
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn mul_int(self, k: i64) -> Frac {
        Frac::new(self.num * k, self.den)
    }

    pub fn add_int(self, k: i64) -> Frac {
        Frac {
            num: self.num + k * self.den,
            den: self.den,
        }
    }
}

impl std::ops::Add for Frac {
    type Output = Frac;

    fn add(self, other: Frac) -> Frac {
        Frac::new(
            self.num * other.den + other.num * self.den,
            self.den * other.den,
        )
    }
}

impl std::ops::Sub for Frac {
    type Output = Frac;

    fn sub(self, other: Frac) -> Frac {
        Frac::new(
            self.num * other.den - other.num * self.den,
            self.den * other.den,
        )
    }
}

impl PartialOrd for Frac {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Frac {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

impl fmt::Display for Frac {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    if a == 0 {
        return b.max(1);
    }
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

// ---------------------------------------------------------------------------
// Layer and net specifications
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv,
    Pool,
    Norm,
    Relu,
}

impl LayerKind {
    pub fn token(&self) -> &'static str {
        match self {
            LayerKind::Conv => "conv",
            LayerKind::Pool => "pool",
            LayerKind::Norm => "norm",
            LayerKind::Relu => "relu",
        }
    }

    /// Conv and pool layers move geometry; norm and relu do not.
    pub fn is_active(&self) -> bool {
        matches!(self, LayerKind::Conv | LayerKind::Pool)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub window: u32,
    pub stride: u32,
    pub padding: u32,
    pub in_channels: u32,
    pub out_channels: u32,
}

impl LayerSpec {
    pub fn conv(
        window: u32,
        stride: u32,
        padding: u32,
        in_channels: u32,
        out_channels: u32,
    ) -> Self {
        LayerSpec {
            kind: LayerKind::Conv,
            window,
            stride,
            padding,
            in_channels,
            out_channels,
        }
    }

    pub fn pool(window: u32, stride: u32, channels: u32) -> Self {
        LayerSpec {
            kind: LayerKind::Pool,
            window,
            stride,
            padding: 0,
            in_channels: channels,
            out_channels: channels,
        }
    }

    pub fn norm(channels: u32) -> Self {
        LayerSpec {
            kind: LayerKind::Norm,
            window: 1,
            stride: 1,
            padding: 0,
            in_channels: channels,
            out_channels: channels,
        }
    }

    pub fn relu(channels: u32) -> Self {
        LayerSpec {
            kind: LayerKind::Relu,
            window: 1,
            stride: 1,
            padding: 0,
            in_channels: channels,
            out_channels: channels,
        }
    }

    fn validate(&self, index: usize) -> Result<(), GeometryError> {
        let fail = |msg: String| Err(GeometryError::InvalidNet(format!("layer {index}: {msg}")));
        if self.window < 1 || self.stride < 1 {
            return fail(format!(
                "window {} and stride {} must be >= 1",
                self.window, self.stride
            ));
        }
        match self.kind {
            LayerKind::Norm | LayerKind::Relu => {
                if self.window != 1 || self.stride != 1 || self.padding != 0 {
                    return fail("norm/relu layers must have W=1, s=1, P=0".into());
                }
                if self.in_channels != self.out_channels {
                    return fail("norm/relu layers must preserve channels".into());
                }
            }
            LayerKind::Pool => {
                if self.in_channels != self.out_channels {
                    return fail("pool layers must preserve channels".into());
                }
            }
            LayerKind::Conv => {}
        }
        Ok(())
    }
}

/// Output extent of one layer given its input extent, or `None` when the
/// window does not fit.
pub fn output_extent(input: u32, layer: &LayerSpec) -> Option<u32> {
    let padded = input as i64 + 2 * layer.padding as i64;
    let span = padded - layer.window as i64;
    if span < 0 {
        return None;
    }
    Some((span / layer.stride as i64) as u32 + 1)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetSpec {
    pub input_size: u32,
    pub input_channels: u32,
    pub layers: Vec<LayerSpec>,
}

impl NetSpec {
    pub fn new(
        input_size: u32,
        input_channels: u32,
        layers: Vec<LayerSpec>,
    ) -> Result<Self, GeometryError> {
        let net = NetSpec {
            input_size,
            input_channels,
            layers,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.input_size == 0 || self.input_channels == 0 {
            return Err(GeometryError::InvalidNet(
                "zero input size or channels".into(),
            ));
        }
        if self.layers.is_empty() {
            return Err(GeometryError::InvalidNet("no layers".into()));
        }
        let mut channels = self.input_channels;
        let mut extent = self.input_size;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.validate(i + 1)?;
            if layer.in_channels != channels {
                return Err(GeometryError::InvalidNet(format!(
                    "layer {}: expects {} input channels, previous layer provides {}",
                    i + 1,
                    layer.in_channels,
                    channels
                )));
            }
            extent = output_extent(extent, layer).ok_or_else(|| {
                GeometryError::InvalidNet(format!("layer {}: output extent would be < 1", i + 1))
            })?;
            channels = layer.out_channels;
        }
        Ok(())
    }

    /// Indices into `layers` of the geometry-active (conv/pool) entries.
    pub fn active_layers(&self) -> Vec<usize> {
        self.layers
            .iter()
            .enumerate()
            .filter(|(_, l)| l.kind.is_active())
            .map(|(i, _)| i)
            .collect()
    }

    pub fn num_active(&self) -> usize {
        self.layers.iter().filter(|l| l.kind.is_active()).count()
    }

    /// Spatial extent of every layer's output, full list order.
    pub fn extents(&self) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.layers.len());
        let mut extent = self.input_size;
        for layer in &self.layers {
            extent = output_extent(extent, layer).expect("validated net");
            out.push(extent);
        }
        out
    }

    /// Channel count of the named active layer's output.
    pub fn active_channels(&self, index: usize) -> Result<u32, GeometryError> {
        let li = self.checked_active(index)?;
        Ok(self.layers[li].out_channels)
    }

    /// Spatial extent of the named active layer's output.
    pub fn active_extent(&self, index: usize) -> Result<u32, GeometryError> {
        let li = self.checked_active(index)?;
        Ok(self.extents()[li])
    }

    fn checked_active(&self, index: usize) -> Result<usize, GeometryError> {
        let active = self.active_layers();
        if index == 0 || index > active.len() {
            return Err(GeometryError::LayerIndexOutOfRange {
                index,
                count: active.len(),
            });
        }
        Ok(active[index - 1])
    }

    /// Human label for an active layer, e.g. "conv3" or "pool1".
    pub fn active_label(&self, index: usize) -> String {
        let active = self.active_layers();
        let li = active[index - 1];
        let kind = self.layers[li].kind;
        let ordinal = self.layers[..=li].iter().filter(|l| l.kind == kind).count();
        format!("{}{}", kind.token(), ordinal)
    }

    // -- bundled architectures ------------------------------------------------

    /// The five-conv reference stack. Input 227 keeps the central 5x5 block of
    /// the 13x13 conv5 map fully inside the unpadded input, which the dense
    /// extractor depends on.
    pub fn reference() -> NetSpec {
        let l = vec![
            LayerSpec::conv(11, 4, 0, 3, 96),
            LayerSpec::relu(96),
            LayerSpec::norm(96),
            LayerSpec::pool(3, 2, 96),
            LayerSpec::conv(5, 1, 2, 96, 256),
            LayerSpec::relu(256),
            LayerSpec::norm(256),
            LayerSpec::pool(3, 2, 256),
            LayerSpec::conv(3, 1, 1, 256, 384),
            LayerSpec::relu(384),
            LayerSpec::conv(3, 1, 1, 384, 384),
            LayerSpec::relu(384),
            LayerSpec::conv(3, 1, 1, 384, 256),
            LayerSpec::relu(256),
            LayerSpec::pool(3, 2, 256),
        ];
        NetSpec::new(227, 3, l).expect("reference net is valid")
    }

    /// Small stack for fast tests and the synthetic-data pipeline:
    /// input 64, three conv and two pool layers, 32-dim output.
    pub fn tiny() -> NetSpec {
        let l = vec![
            LayerSpec::conv(5, 2, 0, 3, 16),
            LayerSpec::relu(16),
            LayerSpec::pool(2, 2, 16),
            LayerSpec::conv(3, 1, 1, 16, 24),
            LayerSpec::relu(24),
            LayerSpec::pool(2, 2, 24),
            LayerSpec::conv(3, 1, 1, 24, 32),
            LayerSpec::relu(32),
        ];
        NetSpec::new(64, 3, l).expect("tiny net is valid")
    }

    // -- text format ------------------------------------------------------

    /// Line-oriented text format:
    ///
    /// ```text
    /// input <size> <channels>
    /// <kind> <W> <s> <P> <in> <out>    # one line per layer
    /// ```
    pub fn parse(text: &str) -> Result<NetSpec, GeometryError> {
        let mut input: Option<(u32, u32)> = None;
        let mut layers = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |msg: &str| GeometryError::Parse {
                line: ln + 1,
                msg: msg.to_string(),
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields[0] == "input" {
                if fields.len() != 3 {
                    return Err(parse_err("expected: input <size> <channels>"));
                }
                let size = fields[1].parse().map_err(|_| parse_err("bad input size"))?;
                let ch = fields[2]
                    .parse()
                    .map_err(|_| parse_err("bad channel count"))?;
                input = Some((size, ch));
                continue;
            }
            if fields.len() != 6 {
                return Err(parse_err("expected: <kind> <W> <s> <P> <in> <out>"));
            }
            let kind = match fields[0] {
                "conv" => LayerKind::Conv,
                "pool" => LayerKind::Pool,
                "norm" => LayerKind::Norm,
                "relu" => LayerKind::Relu,
                other => return Err(parse_err(&format!("unknown layer kind {other:?}"))),
            };
            let nums: Result<Vec<u32>, _> = fields[1..].iter().map(|f| f.parse()).collect();
            let nums = nums.map_err(|_| parse_err("bad numeric field"))?;
            layers.push(LayerSpec {
                kind,
                window: nums[0],
                stride: nums[1],
                padding: nums[2],
                in_channels: nums[3],
                out_channels: nums[4],
            });
        }
        let (size, ch) = input.ok_or(GeometryError::Parse {
            line: 0,
            msg: "missing `input <size> <channels>` line".into(),
        })?;
        NetSpec::new(size, ch, layers)
    }

    pub fn load(path: &Path) -> Result<NetSpec, GeometryError> {
        let text = std::fs::read_to_string(path)?;
        NetSpec::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("input {} {}\n", self.input_size, self.input_channels);
        for l in &self.layers {
            out.push_str(&format!(
                "{} {} {} {} {} {}\n",
                l.kind.token(),
                l.window,
                l.stride,
                l.padding,
                l.in_channels,
                l.out_channels
            ));
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), GeometryError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Geometry table
// ---------------------------------------------------------------------------

/// One geometry-active layer's derived quantities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeometryRow {
    /// 1-based index among geometry-active layers.
    pub index: usize,
    pub label: String,
    pub kind: LayerKind,
    pub window: u32,
    pub stride_cells: u32,
    pub padding: u32,
    /// Pixel distance between adjacent feature centers (S_i).
    pub pixel_stride: u64,
    /// 1-based pixel coordinate of the top-left feature center (x_i),
    /// table convention.
    pub center: Frac,
    /// Receptive-field side length in pixels (rf_i).
    pub rf: u64,
    /// Output spatial extent in cells.
    pub out_size: u32,
}

/// Full geometry table, one row per conv/pool layer.
pub fn geometry_table(net: &NetSpec) -> Result<Vec<GeometryRow>, GeometryError> {
    net.validate()?;
    let extents = net.extents();
    let mut rows = Vec::new();
    let mut stride: u64 = 1;
    let mut center = Frac::int(0);
    let mut rf: u64 = 1;
    let mut first = true;
    let mut active_index = 0;
    for (li, layer) in net.layers.iter().enumerate() {
        if !layer.kind.is_active() {
            continue;
        }
        active_index += 1;
        if first {
            // Convention base: x_1 = (W_1 + 1)/2, first-layer padding ignored.
            center = Frac::new(layer.window as i64 + 1, 2);
            first = false;
        } else {
            let step = (Frac::new(layer.window as i64 - 1, 2) - Frac::int(layer.padding as i64))
                .mul_int(stride as i64);
            center = center + step;
        }
        rf += (layer.window as u64 - 1) * stride;
        stride *= layer.stride as u64;
        rows.push(GeometryRow {
            index: active_index,
            label: net.active_label(active_index),
            kind: layer.kind,
            window: layer.window,
            stride_cells: layer.stride,
            padding: layer.padding,
            pixel_stride: stride,
            center,
            rf,
            out_size: extents[li],
        });
    }
    Ok(rows)
}

fn row(net: &NetSpec, index: usize) -> Result<GeometryRow, GeometryError> {
    let rows = geometry_table(net)?;
    rows.into_iter()
        .nth(index.wrapping_sub(1))
        .ok_or(GeometryError::LayerIndexOutOfRange {
            index,
            count: net.num_active(),
        })
}

/// S_i: pixel stride between adjacent layer-`index` feature centers.
pub fn layer_stride(net: &NetSpec, index: usize) -> Result<u64, GeometryError> {
    Ok(row(net, index)?.pixel_stride)
}

/// x_i: 1-based pixel coordinate of the top-left feature center.
pub fn top_left_center(net: &NetSpec, index: usize) -> Result<Frac, GeometryError> {
    Ok(row(net, index)?.center)
}

/// rf_i: receptive-field side length in pixels.
pub fn receptive_field_extent(net: &NetSpec, index: usize) -> Result<u64, GeometryError> {
    Ok(row(net, index)?.rf)
}

/// Pixel center of cell (u, v), table convention, 1-based:
/// `(x_i + u*S_i, x_i + v*S_i)`. Convolutions are homogeneous in x and y, so
/// the same base serves both axes.
pub fn feature_center(
    net: &NetSpec,
    index: usize,
    u: u32,
    v: u32,
) -> Result<(Frac, Frac), GeometryError> {
    let r = row(net, index)?;
    if u >= r.out_size || v >= r.out_size {
        return Err(GeometryError::CellOutOfExtent {
            u,
            v,
            size: r.out_size,
        });
    }
    let x = r.center.add_int(u as i64 * r.pixel_stride as i64);
    let y = r.center.add_int(v as i64 * r.pixel_stride as i64);
    Ok((x, y))
}

// ---------------------------------------------------------------------------
// Support boxes and interior cells
// ---------------------------------------------------------------------------

/// Inclusive pixel interval (0-based) that influences one cell along one
/// axis. May extend outside `[0, input_size)` for cells whose window reaches
/// into zero padding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Support {
    pub lo: i64,
    pub hi: i64,
}

impl Support {
    /// Interval width in pixels (the receptive-field extent).
    pub fn span(&self) -> i64 {
        self.hi - self.lo + 1
    }

    pub fn inside(&self, extent: u32) -> bool {
        self.lo >= 0 && self.hi < extent as i64
    }
}

/// Exact 1-D support of cell `u` at active layer `index`, by interval
/// propagation through windows, strides, and padding. Unlike the table
/// convention this accounts for first-layer padding.
pub fn cell_support(net: &NetSpec, index: usize, u: u32) -> Result<Support, GeometryError> {
    let active = net.active_layers();
    if index == 0 || index > active.len() {
        return Err(GeometryError::LayerIndexOutOfRange {
            index,
            count: active.len(),
        });
    }
    let r = row(net, index)?;
    if u >= r.out_size {
        return Err(GeometryError::CellOutOfExtent {
            u,
            v: 0,
            size: r.out_size,
        });
    }
    let mut lo = u as i64;
    let mut hi = u as i64;
    for li in (0..=active[index - 1]).rev() {
        let l = &net.layers[li];
        if !l.kind.is_active() {
            continue;
        }
        lo = lo * l.stride as i64 - l.padding as i64;
        hi = hi * l.stride as i64 - l.padding as i64 + l.window as i64 - 1;
    }
    Ok(Support { lo, hi })
}

/// Pixel box (0-based, inclusive) influencing cell (u, v): the receptive
/// field in true image coordinates.
pub fn rf_box(
    net: &NetSpec,
    index: usize,
    u: u32,
    v: u32,
) -> Result<(Support, Support), GeometryError> {
    let sx = cell_support(net, index, u)?;
    let sy = cell_support(net, index, v)?;
    Ok((sx, sy))
}

/// Cells of active layer `index` whose receptive field lies entirely within
/// the unpadded input, i.e. whose activation never reads zero padding.
/// Row-major (v, u) order.
pub fn interior_cells(net: &NetSpec, index: usize) -> Result<Vec<(u32, u32)>, GeometryError> {
    let range = interior_range(net, index)?;
    let mut cells = Vec::new();
    if let Some((lo, hi)) = range {
        for v in lo..=hi {
            for u in lo..=hi {
                cells.push((u, v));
            }
        }
    }
    Ok(cells)
}

/// Inclusive cell range `[lo, hi]` (same on both axes) of interior cells,
/// or `None` when no cell is padding-free.
pub fn interior_range(net: &NetSpec, index: usize) -> Result<Option<(u32, u32)>, GeometryError> {
    let r = row(net, index)?;
    let mut lo = None;
    let mut hi = None;
    for u in 0..r.out_size {
        if cell_support(net, index, u)?.inside(net.input_size) {
            if lo.is_none() {
                lo = Some(u);
            }
            hi = Some(u);
        }
    }
    Ok(lo.zip(hi))
}

/// Maximal centered contiguous cell range inside the interior range. This is
/// the block the dense extractor retains per crop: for the reference net at
/// conv5 it is the central 5x5 of the 13x13 map.
pub fn centered_interior_range(
    net: &NetSpec,
    index: usize,
) -> Result<Option<(u32, u32)>, GeometryError> {
    let r = row(net, index)?;
    let Some((lo, hi)) = interior_range(net, index)? else {
        return Ok(None);
    };
    let n = r.out_size;
    // Distance from the map center must be symmetric; for even n the center
    // straddles two cells.
    let (c_lo, c_hi) = if n % 2 == 1 {
        ((n - 1) / 2, (n - 1) / 2)
    } else {
        (n / 2 - 1, n / 2)
    };
    if c_lo < lo || c_hi > hi {
        return Ok(None);
    }
    let k = (c_lo - lo).min(hi - c_hi);
    Ok(Some((c_lo - k, c_hi + k)))
}
