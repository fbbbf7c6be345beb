//! JSON has no infinities; reports write them as the strings `"+inf"`/`"-inf"`.

use serde::Serializer;

pub fn extended_f64<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str(if *v > 0.0 { "+inf" } else { "-inf" })
    } else {
        s.serialize_f64(*v)
    }
}

pub fn extended_f64_opt<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(x) => extended_f64(x, s),
        None => s.serialize_none(),
    }
}
