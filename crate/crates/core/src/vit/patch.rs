use super::VitError;
use crate::{Scalar, Tensor};

/// Cuts a square `[S, S]` image into `(S/p)^2` flattened `p x p` patches.
///
/// Patches are emitted in row-major grid order; pixels inside a patch are
/// row-major as well.
pub fn patchify<T: Scalar>(image: &Tensor<T>, patch: usize) -> Result<Tensor<T>, VitError> {
    if image.rank() != 2 || image.shape()[0] != image.shape()[1] {
        return Err(VitError::ImageShape {
            expected: "square [S, S]".into(),
            got: image.shape().to_vec(),
        });
    }
    let size = image.shape()[0];
    if patch == 0 || !size.is_multiple_of(patch) {
        return Err(VitError::ImageShape {
            expected: format!("side divisible by patch size {patch}"),
            got: image.shape().to_vec(),
        });
    }
    let g = size / patch;
    let mut out = Vec::with_capacity(size * size);
    for gr in 0..g {
        for gc in 0..g {
            for r in 0..patch {
                let start = (gr * patch + r) * size + gc * patch;
                out.extend_from_slice(&image.data()[start..start + patch]);
            }
        }
    }
    Ok(Tensor::new(&[g * g, patch * patch], out)?)
}

/// Inverse of [`patchify`].
pub fn unpatchify<T: Scalar>(patches: &Tensor<T>, patch: usize) -> Result<Tensor<T>, VitError> {
    let (count, dim) = patches.dims2();
    let g = (count as f64).sqrt().round() as usize;
    if g * g != count || dim != patch * patch {
        return Err(VitError::ImageShape {
            expected: format!("[g^2, {}]", patch * patch),
            got: patches.shape().to_vec(),
        });
    }
    let size = g * patch;
    let mut out = vec![T::zero(); size * size];
    for (idx, p) in patches.data().chunks(dim).enumerate() {
        let (gr, gc) = (idx / g, idx % g);
        for r in 0..patch {
            let start = (gr * patch + r) * size + gc * patch;
            out[start..start + patch].copy_from_slice(&p[r * patch..(r + 1) * patch]);
        }
    }
    Ok(Tensor::new(&[size, size], out)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_round_trip() {
        let img = Tensor::<f32>::from_fn(&[32, 32], |i| (i % 97) as f32 / 96.0);
        let p = patchify(&img, 8).unwrap();
        assert_eq!(p.shape(), &[16, 64]);
        assert_eq!(unpatchify(&p, 8).unwrap(), img);
        // second patch starts at column 8 of row 0
        assert_eq!(p.at(&[1, 0]), img.at(&[0, 8]));
        assert_eq!(p.at(&[4, 9]), img.at(&[9, 1]));
    }

    #[test]
    fn constant_image_gives_constant_patches() {
        let img = Tensor::<f64>::full(&[16, 16], 0.3);
        let p = patchify(&img, 4).unwrap();
        assert!(p.data().iter().all(|&v| v == 0.3));
    }

    #[test]
    fn size_mismatch_is_rejected() {
        let img = Tensor::<f64>::zeros(&[10, 10]);
        assert!(patchify(&img, 4).is_err());
        assert!(patchify(&Tensor::<f64>::zeros(&[8, 4]), 4).is_err());
    }
}
