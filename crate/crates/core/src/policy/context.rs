//! Deterministic summary of the generated prefix, fed to the policy at every
//! step alongside the token embedding.
//!
//! Slots: per category "required and not yet emitted", per category
//! "emitted" (0, 0.5, 1 for 0, 1, ≥2 instances), the current block's
//! category one-hot, the emitted-object fraction, an "anything still
//! required" flag, and coarse one-hots of the previous object's x/y bins and
//! the current block's x bin.

use super::codec::{TokenId, TokenKind, TokenVocab, POSITION_BINS};
use crate::scene::{DesignBrief, MAX_OBJECTS};

/// Coarse position cells per axis.
pub const COARSE_BINS: usize = 8;

pub fn context_dimension(n_categories: usize) -> usize {
    3 * n_categories + 2 + 3 * COARSE_BINS
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct PrefixContext {
    required: Vec<u32>,
    emitted: Vec<u32>,
    objects: usize,
    current_category: Option<usize>,
    current_x: Option<usize>,
    current_y: Option<usize>,
    previous: Option<(usize, usize)>,
}

fn coarse(bin: usize) -> usize {
    bin * COARSE_BINS / POSITION_BINS
}

impl PrefixContext {
    pub(crate) fn new(brief: &DesignBrief, n_categories: usize) -> Self {
        let mut required = vec![0; n_categories];
        for (&c, &n) in &brief.required_categories {
            if c < n_categories {
                required[c] = n;
            }
        }
        Self {
            required,
            emitted: vec![0; n_categories],
            objects: 0,
            current_category: None,
            current_x: None,
            current_y: None,
            previous: None,
        }
    }

    pub(crate) fn advance(&mut self, vocab: &TokenVocab, token: TokenId) {
        match vocab.kind(token) {
            Some(TokenKind::Category(c)) => {
                self.emitted[c] += 1;
                self.objects += 1;
                self.current_category = Some(c);
            }
            Some(TokenKind::XBin(b)) => self.current_x = Some(b),
            Some(TokenKind::YBin(b)) => self.current_y = Some(b),
            Some(TokenKind::Material(_)) => {
                if let (Some(x), Some(y)) = (self.current_x, self.current_y) {
                    self.previous = Some((x, y));
                }
                self.current_category = None;
                self.current_x = None;
                self.current_y = None;
            }
            _ => {}
        }
    }

    /// Nonzero entries as `(index, value)`, ascending by index.
    pub(crate) fn sparse(&self) -> Vec<(usize, f64)> {
        let n = self.required.len();
        let mut out = Vec::with_capacity(n + 6);
        let mut missing = false;
        for c in 0..n {
            if self.emitted[c] < self.required[c] {
                out.push((c, 1.0));
                missing = true;
            }
        }
        for c in 0..n {
            if self.emitted[c] > 0 {
                out.push((n + c, self.emitted[c].min(2) as f64 / 2.0));
            }
        }
        if let Some(c) = self.current_category {
            out.push((2 * n + c, 1.0));
        }
        let at = 3 * n;
        if self.objects > 0 {
            out.push((at, self.objects as f64 / MAX_OBJECTS as f64));
        }
        if missing {
            out.push((at + 1, 1.0));
        }
        let at = at + 2;
        if let Some((x, y)) = self.previous {
            out.push((at + coarse(x), 1.0));
            out.push((at + COARSE_BINS + coarse(y), 1.0));
        }
        if let Some(x) = self.current_x {
            out.push((at + 2 * COARSE_BINS + coarse(x), 1.0));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{Catalog, RoomSpec};

    #[test]
    fn tracks_required_and_positions() {
        let catalog = Catalog::default();
        let vocab = TokenVocab::new(&catalog);
        let n = vocab.n_categories();
        let room = RoomSpec::rectangle(3.0, 3.0, 2.7).unwrap();
        let mut brief = DesignBrief::bare(room);
        brief.required_categories.insert(2, 1);
        let mut ctx = PrefixContext::new(&brief, n);
        assert_eq!(ctx.sparse(), vec![(2, 1.0), (3 * n + 1, 1.0)]);
        for t in [vocab.category(2), vocab.x_bin(31), vocab.y_bin(4), vocab.size(0), vocab.material(0)] {
            ctx.advance(&vocab, t);
        }
        let at = 3 * n + 2;
        assert_eq!(
            ctx.sparse(),
            vec![
                (n + 2, 0.5),
                (3 * n, 1.0 / MAX_OBJECTS as f64),
                (at + 7, 1.0),
                (at + COARSE_BINS + 1, 1.0)
            ]
        );
    }
}
