pub fn placeholder() -> f64 { 0.0 }
