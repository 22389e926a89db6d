pub mod cert;
pub mod cost;
pub mod crypto;
pub mod engine;
pub mod kgc;
pub mod sim;
pub mod wire;
