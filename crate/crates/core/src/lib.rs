pub mod dynlp;
pub mod freefall;
pub mod horizon;
pub mod instances;
pub mod ladder;
pub mod learner;
pub mod lp;
pub mod setting;
pub mod sim;
pub mod statics;
pub mod trajectory;
pub mod winwin;
