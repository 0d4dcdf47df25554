use thiserror::Error;

use crate::config::ConfigError;
use crate::datasets::DatasetError;
use crate::embedding::EmbeddingError;
use crate::eval::EvalError;
use crate::formats::FormatError;
use crate::gnn::GnnError;
use crate::hin::HinError;
use crate::metapath::SampleError;
use crate::predictor::PredictorError;
use crate::projection::ProjectionError;
use crate::skipgram::SkipGramError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Graph(#[from] HinError),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    SkipGram(#[from] SkipGramError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Gnn(#[from] GnnError),
    #[error(transparent)]
    Predictor(#[from] PredictorError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Name of the innermost failing pipeline stage, if any.
    pub fn stage(&self) -> Option<&str> {
        match self {
            Error::Stage { stage, source } => source.stage().or(Some(stage)),
            _ => None,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Tags errors with the name of the stage that produced them.
pub trait StageContext<T> {
    fn stage(self, name: impl Into<String>) -> Result<T>;
}

impl<T, E: Into<Error>> StageContext<T> for std::result::Result<T, E> {
    fn stage(self, name: impl Into<String>) -> Result<T> {
        self.map_err(|e| Error::Stage { stage: name.into(), source: Box::new(e.into()) })
    }
}
