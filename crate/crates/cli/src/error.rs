use std::fmt;
use std::path::Path;

use orchard_sim::basetree::LibraryError;
use orchard_sim::metrics::MetricsError;
use orchard_sim::panel::PanelError;
use orchard_sim::ply::CloudIoError;
use orchard_sim::treegen::GenError;
use orchard_sim::voxel::VoxelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Config,
    Io,
    Infeasible,
    Mismatch,
}

impl Category {
    pub fn exit_code(self) -> i32 {
        match self {
            Category::Config => 2,
            Category::Io => 3,
            Category::Infeasible => 4,
            Category::Mismatch => 5,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Category::Config => "config",
            Category::Io => "io",
            Category::Infeasible => "infeasible",
            Category::Mismatch => "mismatch",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub category: Category,
    pub detail: String,
}

/// One line: `error[<category>]: <detail>`.
impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}]: {}", self.category.name(), self.detail.replace('\n', " "))
    }
}

impl CliError {
    pub fn new(category: Category, detail: impl Into<String>) -> Self {
        CliError { category, detail: detail.into() }
    }

    pub fn config(detail: impl Into<String>) -> Self {
        Self::new(Category::Config, detail)
    }

    pub fn io(path: &Path, e: impl fmt::Display) -> Self {
        Self::new(Category::Io, format!("{}: {e}", path.display()))
    }

    /// Prefixes the detail with the artifact it concerns.
    pub fn at(mut self, path: &Path) -> Self {
        self.detail = format!("{}: {}", path.display(), self.detail);
        self
    }
}

impl From<LibraryError> for CliError {
    fn from(e: LibraryError) -> Self {
        let cat = match e {
            LibraryError::Params(_) => Category::Config,
            _ => Category::Io,
        };
        CliError::new(cat, e.to_string())
    }
}

impl From<GenError> for CliError {
    fn from(e: GenError) -> Self {
        let cat = match e {
            GenError::InvalidParams(_) => Category::Config,
            _ => Category::Infeasible,
        };
        CliError::new(cat, e.to_string())
    }
}

impl From<PanelError> for CliError {
    fn from(e: PanelError) -> Self {
        let cat = match e {
            PanelError::EmptyPool | PanelError::PoolTooSmall { .. } => Category::Infeasible,
            _ => Category::Config,
        };
        CliError::new(cat, e.to_string())
    }
}

impl From<CloudIoError> for CliError {
    fn from(e: CloudIoError) -> Self {
        CliError::new(Category::Io, e.to_string())
    }
}

impl From<VoxelError> for CliError {
    fn from(e: VoxelError) -> Self {
        let cat = match e {
            VoxelError::EmptyInput => Category::Infeasible,
            VoxelError::InvalidVoxelSize(_) => Category::Config,
        };
        CliError::new(cat, e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        let cat = match e {
            MetricsError::Io(_) | MetricsError::Parse { .. } => Category::Io,
            _ => Category::Mismatch,
        };
        CliError::new(cat, e.to_string())
    }
}
