//! Input files, the daily feature table, scaling and the synthetic market.

pub mod io;
pub mod scaling;
pub mod synthetic;
pub mod table;

pub(crate) use io::csv_error;
pub use io::{
    join_daily_data, load_daily_data, read_csv, read_csv_file, write_csv, DailyData, DataPaths, FlowRecord,
    FutureRecord, IndexRecord, RawData,
};
pub use scaling::Standardizer;
pub use synthetic::{generate_synthetic, planted_effect, SyntheticBundle, SyntheticConfig, SyntheticTruth};
pub use table::{
    build_feature_table, consolidate, correlation_matrix, train_test_split, ConsolidatedTable, FeatureRow,
    FEATURE_COLUMNS, TABLE_COLUMNS,
};
