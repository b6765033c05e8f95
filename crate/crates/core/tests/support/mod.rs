pub mod gradcheck;
pub mod mtf_oracle;
