//! ROC/AUC, per-condition evaluation and the buffer-size sweep.

mod eval;
mod roc;

pub use eval::{
    buffer_sweep, evaluate, results_csv, windowed_scores, write_results, Condition, ConditionRow, ConditionTable,
    Pooling, SweepPoint, SweepResult, DEFAULT_FRACTIONS,
};
pub use roc::{auc, auc_value, RocResult};
