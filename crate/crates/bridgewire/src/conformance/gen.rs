//! Seeded random [`Value`] generation.

use bridgewire_core::{
    ArrayData, Bitmap, Complex32, Complex64, ElemType, FnTarget, StructValue, TableValue, TypedArray, Value,
};
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Bounds and weights for generated values.
#[derive(Clone, Debug)]
pub struct GenConfig {
    /// Nesting levels below the root. Zero yields only leaves.
    pub max_depth: usize,
    pub max_len: usize,
    /// Relative weight per element type, in [`ElemType::ALL`] order.
    pub elem_weights: [u32; 11],
    /// Chance that an array carries a missing bitmap at all; within such an
    /// array each slot is missing with the same probability.
    pub missing_prob: f64,
    /// Leave out REF and FNREF, which only make sense inside a session.
    pub data_only: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { max_depth: 5, max_len: 1000, elem_weights: [1; 11], missing_prob: 0.25, data_only: false }
    }
}

pub struct ValueGenerator {
    cfg: GenConfig,
    elems: WeightedIndex<u32>,
    rng: ChaCha8Rng,
}

const NAME_START: &[char] = &['a', 'b', 'x', 'y', 'z', 'σ', 'λ', '∇', 'é'];
const NAME_REST: &[char] = &['a', 'e', 'k', 'r', '0', '1', '9', '_', 'ß', 'μ'];
const TEXT: &[char] = &['a', 'Z', ' ', '0', '"', '\\', '\n', 'σ', '∇', '漢', '🙂', '\u{0}', '\t', '/'];

impl ValueGenerator {
    pub fn new(seed: u64) -> Self {
        ValueGenerator::with_config(GenConfig::default(), seed)
    }

    pub fn with_config(cfg: GenConfig, seed: u64) -> Self {
        let elems = WeightedIndex::new(cfg.elem_weights).expect("at least one element type has weight");
        ValueGenerator { cfg, elems, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn config(&self) -> &GenConfig {
        &self.cfg
    }

    pub fn gen_value(&mut self) -> Value {
        let depth = self.cfg.max_depth;
        self.value(depth)
    }

    fn value(&mut self, depth: usize) -> Value {
        let branch = if depth == 0 { 0 } else { 3 };
        let leaves = if self.cfg.data_only { 3 } else { 5 };
        let pick = self.rng.gen_range(0..leaves + branch);
        match (pick, pick >= leaves) {
            (_, true) => match pick - leaves {
                0 => {
                    let n = self.rng.gen_range(0..5);
                    Value::List((0..n).map(|_| self.value(depth - 1)).collect())
                }
                1 => {
                    let names = {
                        let n = self.rng.gen_range(0..5);
                        self.names(n)
                    };
                    Value::NamedList(names.into_iter().map(|n| (n, self.value(depth - 1))).collect())
                }
                _ => {
                    let names = {
                        let n = self.rng.gen_range(0..4);
                        self.names(n)
                    };
                    let fields = names.into_iter().map(|n| (n, self.value(depth - 1))).collect();
                    Value::Struct(StructValue { type_name: self.type_name(), fields })
                }
            },
            (0, _) => Value::Null,
            (1, _) => Value::Array(self.gen_array()),
            (2, _) => Value::Table(self.table()),
            (3, _) => Value::Ref { id: self.rng.gen_range(1..u64::MAX), type_name: self.type_name() },
            _ => Value::FnRef(match self.rng.gen_range(0..3) {
                0 => FnTarget::Named(format!("Base.{}", self.name())),
                1 => FnTarget::Callback(self.rng.gen_range(1..u64::MAX)),
                _ => FnTarget::TypeConstructor(self.type_name()),
            }),
        }
    }

    fn len(&mut self) -> usize {
        let max = self.cfg.max_len;
        match self.rng.gen_range(0..10) {
            0..=6 => self.rng.gen_range(0..=max.min(8)),
            _ => self.rng.gen_range(0..=max),
        }
    }

    fn dims(&mut self) -> Vec<usize> {
        match self.rng.gen_range(0..6) {
            0 | 1 => Vec::new(),
            2 => {
                let side = ((self.cfg.max_len as f64).sqrt() as usize).max(1);
                vec![self.rng.gen_range(0..=side), self.rng.gen_range(0..=side)]
            }
            3 => vec![self.rng.gen_range(0..3), self.rng.gen_range(0..3), self.rng.gen_range(0..3)],
            _ => vec![self.len()],
        }
    }

    pub fn gen_array(&mut self) -> TypedArray {
        let elem = ElemType::ALL[self.elems.sample(&mut self.rng)];
        let dims = self.dims();
        self.array(elem, dims)
    }

    fn array(&mut self, elem: ElemType, dims: Vec<usize>) -> TypedArray {
        let n = dims.iter().product();
        let data = self.data(elem, n);
        let missing = if self.rng.gen_bool(self.cfg.missing_prob) {
            let p = self.cfg.missing_prob;
            Some(Bitmap::from_flags((0..n).map(|_| self.rng.gen_bool(p))))
        } else {
            None
        };
        TypedArray::new(dims, data, missing).expect("generated array is consistent")
    }

    fn f64(&mut self) -> f64 {
        match self.rng.gen_range(0..12) {
            0 => f64::NAN,
            1 => f64::INFINITY,
            2 => -0.0,
            3 => f64::from_bits(self.rng.gen()),
            4 => self.rng.gen_range(-1e6..1e6f64).round(),
            _ => self.rng.gen_range(-1e3..1e3),
        }
    }

    fn data(&mut self, elem: ElemType, n: usize) -> ArrayData {
        match elem {
            ElemType::F64 => ArrayData::F64((0..n).map(|_| self.f64()).collect()),
            ElemType::F32 => ArrayData::F32((0..n).map(|_| self.f64() as f32).collect()),
            ElemType::I64 => ArrayData::I64((0..n).map(|_| self.rng.gen()).collect()),
            ElemType::I32 => ArrayData::I32((0..n).map(|_| self.rng.gen()).collect()),
            ElemType::I16 => ArrayData::I16((0..n).map(|_| self.rng.gen()).collect()),
            ElemType::I8 => ArrayData::I8((0..n).map(|_| self.rng.gen()).collect()),
            ElemType::U8 => ArrayData::U8((0..n).map(|_| self.rng.gen()).collect()),
            ElemType::Bool => ArrayData::Bool((0..n).map(|_| self.rng.gen()).collect()),
            ElemType::Str => ArrayData::Str((0..n).map(|_| self.text()).collect()),
            ElemType::C128 => ArrayData::C128((0..n).map(|_| Complex64::new(self.f64(), self.f64())).collect()),
            ElemType::C64 => {
                ArrayData::C64((0..n).map(|_| Complex32::new(self.f64() as f32, self.f64() as f32)).collect())
            }
        }
    }

    fn table(&mut self) -> TableValue {
        let rows = self.rng.gen_range(0..=self.cfg.max_len.min(20));
        let names = {
            let n = self.rng.gen_range(0..4);
            self.names(n)
        };
        let columns = names
            .into_iter()
            .map(|n| {
                let elem = ElemType::ALL[self.elems.sample(&mut self.rng)];
                (n, self.array(elem, vec![rows]))
            })
            .collect();
        TableValue::new(columns).expect("generated table is consistent")
    }

    fn text(&mut self) -> String {
        let n = self.rng.gen_range(0..8);
        (0..n).map(|_| TEXT[self.rng.gen_range(0..TEXT.len())]).collect()
    }

    fn name(&mut self) -> String {
        let mut s = String::new();
        s.push(NAME_START[self.rng.gen_range(0..NAME_START.len())]);
        for _ in 0..self.rng.gen_range(0..5) {
            s.push(NAME_REST[self.rng.gen_range(0..NAME_REST.len())]);
        }
        s
    }

    fn names(&mut self, n: usize) -> Vec<String> {
        let mut out: Vec<String> = Vec::with_capacity(n);
        while out.len() < n {
            let name = self.name();
            if !out.contains(&name) {
                out.push(name);
            }
        }
        out
    }

    fn type_name(&mut self) -> String {
        const MODULES: &[&str] = &["Base", "Library", "Nn", "Main"];
        let m = MODULES[self.rng.gen_range(0..MODULES.len())];
        let head = (b'A' + self.rng.gen_range(0..26)) as char;
        format!("{m}.{head}{}", self.name())
    }
}

/// Value kinds tallied by [`coverage`].
pub fn tag_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Array(_) => "array",
        Value::List(_) => "list",
        Value::NamedList(_) => "namedlist",
        Value::Struct(_) => "struct",
        Value::Ref { .. } => "ref",
        Value::FnRef(_) => "fnref",
        Value::Table(_) => "table",
    }
}

/// Every (tag, element type) pair occurring anywhere inside `v`. Array
/// element types are reported under both `array` and, for table columns,
/// `table`.
pub fn coverage(v: &Value, out: &mut std::collections::BTreeSet<(&'static str, Option<ElemType>)>) {
    out.insert((tag_name(v), None));
    match v {
        Value::Array(a) => {
            out.insert(("array", Some(a.elem_type())));
        }
        Value::List(items) => items.iter().for_each(|v| coverage(v, out)),
        Value::NamedList(items) => items.iter().for_each(|(_, v)| coverage(v, out)),
        Value::Struct(s) => s.fields.iter().for_each(|(_, v)| coverage(v, out)),
        Value::Table(t) => t.columns.iter().for_each(|(_, c)| {
            out.insert(("table", Some(c.elem_type())));
        }),
        _ => {}
    }
}
