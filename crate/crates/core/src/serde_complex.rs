//! Serialization of complex scalars and matrices as `[re, im]` pairs;
//! matrices are flat row-major lists.

use num_complex::Complex64;
use serde::ser::{SerializeSeq, Serializer};

use crate::linalg::CMat;

pub fn scalar<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
    serde::Serialize::serialize(&[z.re, z.im], s)
}

pub fn scalars<S: Serializer>(zs: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(zs.len()))?;
    for z in zs {
        seq.serialize_element(&[z.re, z.im])?;
    }
    seq.end()
}

pub fn matrix<S: Serializer>(m: &CMat, s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(m.len()))?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            seq.serialize_element(&[z.re, z.im])?;
        }
    }
    seq.end()
}

pub fn opt_matrix<S: Serializer>(m: &Option<CMat>, s: S) -> Result<S::Ok, S::Error> {
    match m {
        Some(m) => matrix(m, s),
        None => s.serialize_none(),
    }
}
