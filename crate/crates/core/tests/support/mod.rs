pub mod numeric;
pub mod rules;
