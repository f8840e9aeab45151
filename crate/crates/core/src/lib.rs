//! EEG processing in three stages: preprocessing (low-pass FIR filtering and
//! ICA artifact removal), feature extraction (Daubechies wavelet rhythm
//! bands, entropy, power spectra and statistics) and classification
//! (k-NN, linear SVM, MLP).
//!
//! ```text
//! TrialSet ──► preprocess ──► features ──► classify
//!  signal      filter, ICA     wavelet,     standardize,
//!                              spectral     train, evaluate
//! ```
//!
//! Every operation is a pure function over immutable inputs. Anything
//! randomized takes an explicit seed.

pub mod classify;
pub mod error;
pub mod features;
pub mod preprocess;
pub mod signal;
pub mod spectral;
pub mod wavelet;

pub use error::{Error, Result};
