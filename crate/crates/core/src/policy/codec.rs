//! Token vocabulary, grammar, and the layout ↔ token-sequence codec.
//!
//! A sequence is `BOS (CATEGORY XBIN YBIN SIZE MATERIAL)* EOS`. Positions are
//! quantized into 32 bins per axis over the room's bounding box; sizes snap
//! to the nearest catalog variant.

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::scene::{Catalog, DesignBrief, Layout, ObjectInstance, MAX_OBJECTS};

pub type TokenId = u32;

pub const POSITION_BINS: usize = 32;
pub const SIZE_VARIANTS: usize = 3;
pub const BLOCK_LEN: usize = 5;
/// BOS + 12 five-token blocks + EOS.
pub const MAX_SEQUENCE_LEN: usize = 2 + MAX_OBJECTS * BLOCK_LEN;
pub const MAX_VOCAB: usize = 96;

pub const BOS: TokenId = 0;
pub const EOS: TokenId = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Bos,
    Eos,
    Category(usize),
    XBin(usize),
    YBin(usize),
    Size(usize),
    Material(usize),
}

/// Dense token ids for a catalog + palette.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenVocab {
    category_names: Vec<String>,
    material_names: Vec<String>,
}

impl TokenVocab {
    pub fn new(catalog: &Catalog) -> Self {
        Self {
            category_names: catalog.categories().iter().map(|c| c.name.clone()).collect(),
            material_names: catalog.materials().iter().map(|m| m.name.clone()).collect(),
        }
    }

    pub fn n_categories(&self) -> usize {
        self.category_names.len()
    }

    pub fn n_materials(&self) -> usize {
        self.material_names.len()
    }

    fn category_base(&self) -> usize {
        2
    }

    fn x_base(&self) -> usize {
        self.category_base() + self.n_categories()
    }

    fn y_base(&self) -> usize {
        self.x_base() + POSITION_BINS
    }

    fn size_base(&self) -> usize {
        self.y_base() + POSITION_BINS
    }

    fn material_base(&self) -> usize {
        self.size_base() + SIZE_VARIANTS
    }

    pub fn len(&self) -> usize {
        self.material_base() + self.n_materials()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn category(&self, c: usize) -> TokenId {
        (self.category_base() + c) as TokenId
    }

    pub fn x_bin(&self, b: usize) -> TokenId {
        (self.x_base() + b) as TokenId
    }

    pub fn y_bin(&self, b: usize) -> TokenId {
        (self.y_base() + b) as TokenId
    }

    pub fn size(&self, v: usize) -> TokenId {
        (self.size_base() + v) as TokenId
    }

    pub fn material(&self, m: usize) -> TokenId {
        (self.material_base() + m) as TokenId
    }

    pub fn kind(&self, id: TokenId) -> Option<TokenKind> {
        let id = id as usize;
        Some(match id {
            0 => TokenKind::Bos,
            1 => TokenKind::Eos,
            _ if id < self.x_base() => TokenKind::Category(id - self.category_base()),
            _ if id < self.y_base() => TokenKind::XBin(id - self.x_base()),
            _ if id < self.size_base() => TokenKind::YBin(id - self.y_base()),
            _ if id < self.material_base() => TokenKind::Size(id - self.size_base()),
            _ if id < self.len() => TokenKind::Material(id - self.material_base()),
            _ => return None,
        })
    }

    /// Human-readable token name, e.g. `CAT_sofa`, `X3`, `SIZE_M`, `MAT_oak`.
    pub fn name(&self, id: TokenId) -> String {
        match self.kind(id) {
            Some(TokenKind::Bos) => "BOS".into(),
            Some(TokenKind::Eos) => "EOS".into(),
            Some(TokenKind::Category(c)) => format!("CAT_{}", self.category_names[c]),
            Some(TokenKind::XBin(b)) => format!("X{b}"),
            Some(TokenKind::YBin(b)) => format!("Y{b}"),
            Some(TokenKind::Size(v)) => format!("SIZE_{}", ["S", "M", "L"][v]),
            Some(TokenKind::Material(m)) => format!("MAT_{}", self.material_names[m]),
            None => format!("<{id}>"),
        }
    }

    /// Stable digest of the token table.
    pub fn hash(&self) -> String {
        let names: Vec<String> = (0..self.len() as TokenId).map(|t| self.name(t)).collect();
        hex_digest(names.join("\n").as_bytes())
    }

    pub fn range_mask(&self, start: usize, len: usize) -> u128 {
        ((1u128 << len) - 1) << start
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Position in the generation grammar after a prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    /// Next token starts an object block or ends the sequence.
    BlockStart,
    X,
    Y,
    Size,
    Material,
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GrammarState {
    pub slot: Slot,
    pub objects: usize,
    pub length: usize,
}

impl GrammarState {
    /// State right after BOS.
    pub fn start() -> Self {
        Self {
            slot: Slot::BlockStart,
            objects: 0,
            length: 1,
        }
    }

    /// Legal next tokens as a bitmask over ids. Without grammar masking
    /// every non-BOS token is legal; the length cap always forces EOS.
    pub fn legal_mask(&self, vocab: &TokenVocab, masking: bool) -> u128 {
        let eos = 1u128 << EOS;
        if self.slot == Slot::Done {
            return 0;
        }
        if self.length + 1 >= MAX_SEQUENCE_LEN {
            return eos;
        }
        if !masking {
            return vocab.range_mask(0, vocab.len()) & !(1u128 << BOS);
        }
        match self.slot {
            Slot::BlockStart if self.objects >= MAX_OBJECTS => eos,
            Slot::BlockStart => eos | vocab.range_mask(vocab.category_base(), vocab.n_categories()),
            Slot::X => vocab.range_mask(vocab.x_base(), POSITION_BINS),
            Slot::Y => vocab.range_mask(vocab.y_base(), POSITION_BINS),
            Slot::Size => vocab.range_mask(vocab.size_base(), SIZE_VARIANTS),
            Slot::Material => vocab.range_mask(vocab.material_base(), vocab.n_materials()),
            Slot::Done => 0,
        }
    }

    /// Advances past `token`. Out-of-grammar tokens (possible only without
    /// masking) leave the slot where the grammar expected something else;
    /// the decoder treats that as the end of the parse.
    pub fn advance(&mut self, vocab: &TokenVocab, token: TokenId) {
        self.length += 1;
        let kind = vocab.kind(token);
        self.slot = match (self.slot, kind) {
            (_, Some(TokenKind::Eos)) => Slot::Done,
            (Slot::BlockStart, Some(TokenKind::Category(_))) => Slot::X,
            (Slot::X, Some(TokenKind::XBin(_))) => Slot::Y,
            (Slot::Y, Some(TokenKind::YBin(_))) => Slot::Size,
            (Slot::Size, Some(TokenKind::Size(_))) => Slot::Material,
            (Slot::Material, Some(TokenKind::Material(_))) => {
                self.objects += 1;
                Slot::BlockStart
            }
            (slot, _) => slot,
        };
    }
}

fn quantize(v: f64, lo: f64, extent: f64) -> usize {
    let b = ((v - lo) / extent * POSITION_BINS as f64).floor();
    b.clamp(0.0, (POSITION_BINS - 1) as f64) as usize
}

fn bin_center(b: usize, lo: f64, extent: f64) -> f64 {
    lo + (b as f64 + 0.5) * extent / POSITION_BINS as f64
}

/// Index of the catalog size variant closest (Euclidean) to `dims`.
pub fn nearest_variant(variants: &[[f64; 3]; 3], dims: &[f64; 3]) -> usize {
    let dist = |v: &[f64; 3]| {
        v.iter()
            .zip(dims)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
    };
    (0..SIZE_VARIANTS)
        .min_by(|&a, &b| dist(&variants[a]).total_cmp(&dist(&variants[b])))
        .unwrap_or(0)
}

pub fn encode(
    layout: &Layout,
    brief: &DesignBrief,
    catalog: &Catalog,
    vocab: &TokenVocab,
) -> Result<Vec<TokenId>> {
    if layout.objects.len() > MAX_OBJECTS {
        return Err(Error::InvalidInput(format!(
            "cannot encode more than {MAX_OBJECTS} objects"
        )));
    }
    let bbox = brief.room.bounding_box();
    let mut tokens = Vec::with_capacity(2 + BLOCK_LEN * layout.objects.len());
    tokens.push(BOS);
    for obj in &layout.objects {
        let category = catalog.category(obj.category_id).ok_or_else(|| Error::UnknownId {
            kind: "category",
            name: obj.category_id.to_string(),
        })?;
        tokens.push(vocab.category(obj.category_id));
        tokens.push(vocab.x_bin(quantize(obj.position.x, bbox.min.x, bbox.width())));
        tokens.push(vocab.y_bin(quantize(obj.position.y, bbox.min.y, bbox.depth())));
        tokens.push(vocab.size(nearest_variant(&category.size_variants, &obj.dimensions)));
        tokens.push(vocab.material(obj.material_id));
    }
    tokens.push(EOS);
    Ok(tokens)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeStatus {
    Ok,
    Salvaged,
    Empty,
}

/// Parses complete object blocks. Grammar violations and truncated blocks
/// end the parse and mark the result salvaged.
pub fn decode(
    tokens: &[TokenId],
    brief: &DesignBrief,
    catalog: &Catalog,
    vocab: &TokenVocab,
) -> Result<(Layout, DecodeStatus)> {
    if tokens.first() != Some(&BOS) {
        return Err(Error::InvalidInput("token sequence must start with BOS".into()));
    }
    let bbox = brief.room.bounding_box();
    let mut objects = Vec::new();
    let mut salvaged = true;
    let mut rest = &tokens[1..];
    loop {
        match rest.first().map(|&t| vocab.kind(t)) {
            Some(Some(TokenKind::Eos)) => {
                salvaged = false;
                break;
            }
            Some(Some(TokenKind::Category(c))) if objects.len() < MAX_OBJECTS => {
                if rest.len() < BLOCK_LEN {
                    break;
                }
                let kinds: Vec<_> = rest[1..BLOCK_LEN].iter().map(|&t| vocab.kind(t)).collect();
                let (x, y, v, m) = match kinds.as_slice() {
                    [Some(TokenKind::XBin(x)), Some(TokenKind::YBin(y)), Some(TokenKind::Size(v)), Some(TokenKind::Material(m))] => {
                        (*x, *y, *v, *m)
                    }
                    _ => break,
                };
                let category = catalog.category(c).ok_or_else(|| Error::UnknownId {
                    kind: "category",
                    name: c.to_string(),
                })?;
                objects.push(ObjectInstance::new(
                    c,
                    Vec2::new(
                        bin_center(x, bbox.min.x, bbox.width()),
                        bin_center(y, bbox.min.y, bbox.depth()),
                    ),
                    category.size_variants[v],
                    m,
                ));
                rest = &rest[BLOCK_LEN..];
            }
            _ => break,
        }
    }
    let status = if salvaged {
        DecodeStatus::Salvaged
    } else if objects.is_empty() {
        DecodeStatus::Empty
    } else {
        DecodeStatus::Ok
    };
    Ok((Layout::new(brief.room.clone(), objects), status))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::RoomSpec;

    fn setup() -> (Catalog, TokenVocab, DesignBrief) {
        let catalog = Catalog::default();
        let vocab = TokenVocab::new(&catalog);
        let brief = DesignBrief::bare(RoomSpec::rectangle(4.0, 3.2, 2.7).unwrap());
        (catalog, vocab, brief)
    }

    #[test]
    fn vocab_is_dense_and_small() {
        let (_, vocab, _) = setup();
        assert!(vocab.len() <= MAX_VOCAB);
        for id in 0..vocab.len() as TokenId {
            assert!(vocab.kind(id).is_some());
        }
        assert!(vocab.kind(vocab.len() as TokenId).is_none());
    }

    #[test]
    fn encode_lengths() {
        let (catalog, vocab, brief) = setup();
        let empty = Layout::empty(brief.room.clone());
        assert_eq!(encode(&empty, &brief, &catalog, &vocab).unwrap(), vec![BOS, EOS]);
        let two = Layout::new(
            brief.room.clone(),
            vec![
                ObjectInstance::new(0, Vec2::new(1.0, 1.0), [1.6, 2.0, 0.5], 0),
                ObjectInstance::new(1, Vec2::new(3.0, 2.0), [2.0, 0.9, 0.8], 1),
            ],
        );
        assert_eq!(encode(&two, &brief, &catalog, &vocab).unwrap().len(), 12);
    }

    #[test]
    fn decode_examples() {
        let (catalog, vocab, brief) = setup();
        let (layout, status) = decode(&[BOS, EOS], &brief, &catalog, &vocab).unwrap();
        assert!(layout.objects.is_empty());
        assert_eq!(status, DecodeStatus::Empty);

        let sofa = catalog.category_id("sofa").unwrap();
        let oak = catalog.material_id("oak").unwrap();
        let seq = [
            BOS,
            vocab.category(sofa),
            vocab.x_bin(3),
            vocab.y_bin(7),
            vocab.size(1),
            vocab.material(oak),
            EOS,
        ];
        let (layout, status) = decode(&seq, &brief, &catalog, &vocab).unwrap();
        assert_eq!(status, DecodeStatus::Ok);
        assert_eq!(layout.objects.len(), 1);
        assert_eq!(layout.objects[0].dimensions, [2.0, 0.9, 0.8]);
        assert!((layout.objects[0].position.x - 3.5 * 4.0 / 32.0).abs() < 1e-12);

        let truncated = [BOS, vocab.category(sofa), vocab.x_bin(3), vocab.y_bin(7), EOS];
        let (layout, status) = decode(&truncated, &brief, &catalog, &vocab).unwrap();
        assert!(layout.objects.is_empty());
        assert_eq!(status, DecodeStatus::Salvaged);

        let violation = [BOS, vocab.x_bin(3), EOS];
        assert_eq!(
            decode(&violation, &brief, &catalog, &vocab).unwrap().1,
            DecodeStatus::Salvaged
        );
        assert!(decode(&[EOS], &brief, &catalog, &vocab).is_err());
    }

    #[test]
    fn grammar_masks() {
        let (_, vocab, _) = setup();
        let mut st = GrammarState::start();
        let start = st.legal_mask(&vocab, true);
        assert_eq!(start.count_ones() as usize, 1 + vocab.n_categories());
        st.advance(&vocab, vocab.category(0));
        assert_eq!(st.legal_mask(&vocab, true).count_ones() as usize, POSITION_BINS);
        assert_eq!(
            st.legal_mask(&vocab, false).count_ones() as usize,
            vocab.len() - 1
        );
    }
}
