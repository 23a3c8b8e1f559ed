use serde::{Deserialize, Serialize};

use super::VitError;

/// Shape hyperparameters of the Vision Transformer.
///
/// The token sequence is the classification token followed by one token per
/// patch in row-major grid order, so `n_tokens = grid^2 + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViTConfig {
    pub image_size: usize,
    pub patch_size: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub embed_dim: usize,
    pub mlp_dim: usize,
    pub n_classes: usize,
}

impl Default for ViTConfig {
    /// Desk-scale configuration: 32x32 input, 8x8 patches, two blocks of two heads.
    fn default() -> Self {
        Self {
            image_size: 32,
            patch_size: 8,
            n_layers: 2,
            n_heads: 2,
            embed_dim: 32,
            mlp_dim: 64,
            n_classes: 3,
        }
    }
}

impl ViTConfig {
    pub fn validate(&self) -> Result<(), VitError> {
        let positive = [
            ("image_size", self.image_size),
            ("patch_size", self.patch_size),
            ("n_layers", self.n_layers),
            ("n_heads", self.n_heads),
            ("embed_dim", self.embed_dim),
            ("mlp_dim", self.mlp_dim),
            ("n_classes", self.n_classes),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(VitError::InvalidConfig(format!("{name} must be positive")));
        }
        if !self.image_size.is_multiple_of(self.patch_size) {
            return Err(VitError::InvalidConfig(format!(
                "patch_size {} does not divide image_size {}",
                self.patch_size, self.image_size
            )));
        }
        if !self.embed_dim.is_multiple_of(self.n_heads) {
            return Err(VitError::InvalidConfig(format!(
                "n_heads {} does not divide embed_dim {}",
                self.n_heads, self.embed_dim
            )));
        }
        Ok(())
    }

    /// Patches per side.
    pub fn grid(&self) -> usize {
        self.image_size / self.patch_size
    }

    pub fn n_patches(&self) -> usize {
        self.grid() * self.grid()
    }

    pub fn n_tokens(&self) -> usize {
        self.n_patches() + 1
    }

    pub fn patch_dim(&self) -> usize {
        self.patch_size * self.patch_size
    }

    pub fn head_dim(&self) -> usize {
        self.embed_dim / self.n_heads
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        let c = ViTConfig::default();
        c.validate().unwrap();
        assert_eq!(c.n_tokens(), 17);
        assert_eq!(c.head_dim(), 16);
    }

    #[test]
    fn divisibility_is_enforced() {
        let c = ViTConfig { patch_size: 5, ..Default::default() };
        assert!(c.validate().is_err());
        let c = ViTConfig { n_heads: 3, ..Default::default() };
        assert!(c.validate().is_err());
        let c = ViTConfig { n_layers: 0, ..Default::default() };
        assert!(c.validate().is_err());
    }
}
