use crate::real::Real;

/// Named tensor within a parameter set, with its offset into the flat
/// parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ParamInfo {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl ParamInfo {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }
}

/// Uniform access to every learnable tensor, in a fixed order.
pub trait Params<F: Real> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(String, &[usize], &[F]));
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &[usize], &mut [F]));

    fn layout(&self) -> Vec<ParamInfo> {
        let mut out = Vec::new();
        let mut offset = 0;
        self.visit("", &mut |name, shape, data| {
            out.push(ParamInfo {
                name,
                shape: shape.to_vec(),
                offset,
            });
            offset += data.len();
        });
        out
    }

    fn n_params(&self) -> usize {
        let mut n = 0;
        self.visit("", &mut |_, _, data| n += data.len());
        n
    }

    fn to_flat(&self) -> Vec<F> {
        let mut out = Vec::new();
        self.visit("", &mut |_, _, data| out.extend_from_slice(data));
        out
    }

    /// Overwrite every tensor from a flat vector of matching length.
    fn assign_flat(&mut self, flat: &[F]) {
        let mut offset = 0;
        self.visit_mut("", &mut |_, _, data| {
            data.copy_from_slice(&flat[offset..offset + data.len()]);
            offset += data.len();
        });
        assert_eq!(offset, flat.len(), "flat parameter length");
    }

    fn fill_zero(&mut self) {
        self.visit_mut("", &mut |_, _, data| data.fill(F::zero()));
    }

    /// `self += other`, tensor by tensor.
    fn add_assign(&mut self, other: &Self)
    where
        Self: Sized,
    {
        let flat = other.to_flat();
        let mut offset = 0;
        self.visit_mut("", &mut |_, _, data| {
            for (d, o) in data.iter_mut().zip(&flat[offset..]) {
                *d += *o;
            }
            offset += data.len();
        });
    }

    fn scale(&mut self, factor: F) {
        self.visit_mut("", &mut |_, _, data| data.iter_mut().for_each(|d| *d *= factor));
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

/// Implement [`Params`] for a struct of standard-layout ndarray fields.
macro_rules! impl_params {
    ($ty:ident { $($field:ident),* $(,)? }) => {
        impl<F: $crate::real::Real> $crate::model::Params<F> for $ty<F> {
            fn visit(&self, prefix: &str, f: &mut dyn FnMut(String, &[usize], &[F])) {
                $(
                    f(
                        $crate::model::params::join(prefix, stringify!($field)),
                        self.$field.shape(),
                        self.$field.as_slice().expect("standard layout"),
                    );
                )*
            }

            fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &[usize], &mut [F])) {
                $(
                    let shape = self.$field.shape().to_vec();
                    f(
                        $crate::model::params::join(prefix, stringify!($field)),
                        &shape,
                        self.$field.as_slice_mut().expect("standard layout"),
                    );
                )*
            }
        }
    };
}
pub(crate) use impl_params;
