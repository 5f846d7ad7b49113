//! Histogram gradient boosting with one-side gradient sampling and
//! exclusive feature bundling.

mod bins;
mod boost;
mod efb;
mod goss;
mod params;
pub mod tree;

pub use bins::BinMapper;
pub use boost::{bin_features, fit, fit_squared_error, Ensemble};
pub use efb::{efb_bundle, Bundle, BundleMap};
pub use goss::goss_sample;
pub use params::BoostParams;
pub use tree::{find_split, grow_tree, split_gain, Node, SplitInfo, TrainView, Tree, TreeParams};

#[allow(unused_imports)]
pub(crate) use boost::argmax;
