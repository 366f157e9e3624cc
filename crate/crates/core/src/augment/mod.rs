//! Experiment-protocol helpers: few-shot splits, inference prompt
//! construction, up-sample mixing and catalog resampling.

mod mix;
mod nifs;
mod prompts;

pub use mix::{catalog_resample, upsample_mix, CatalogError, MixError, MixSpec, SlotCatalog};
pub use nifs::{
    nifs_split, read_row_ids, rows_md5, verify_row_ids, NifsConfig, NifsError, NifsSplit, RowIdFile,
    RowIdFileError,
};
pub use prompts::{
    build_inference_prompts, InferenceConfig, InferencePrompt, InferencePromptError, PromptStrategy,
    TranslatedValues,
};
