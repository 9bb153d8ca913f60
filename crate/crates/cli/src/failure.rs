use dentreg::pipeline::PipelineError;
use dentreg::projection::ProjectionError;
use dentreg::registration::RegistrationError;

/// Error tagged with its exit code: 1 usage, 2 data, 3 numerical.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
    Numerical(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Usage(e) | Failure::Data(e) | Failure::Numerical(e) => e,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        Failure::Usage(anyhow::anyhow!(msg.into()))
    }
}

/// Attaches a context message and the data exit class to a fallible result.
pub trait Classify<T> {
    fn data(self, context: impl FnOnce() -> String) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn data(self, context: impl FnOnce() -> String) -> Result<T, Failure> {
        self.map_err(|e| Failure::Data(e.into().context(context())))
    }
}

pub fn from_registration(e: RegistrationError, context: &str) -> Failure {
    let class = match &e {
        RegistrationError::InvalidConfig(_) => Failure::Usage,
        RegistrationError::NoSharedCodes | RegistrationError::EmptyInput => Failure::Data,
        _ => Failure::Numerical,
    };
    class(anyhow::Error::new(e).context(context.to_string()))
}

pub fn from_pipeline(e: PipelineError) -> Failure {
    match e {
        PipelineError::Registration(r) => from_registration(r, "registration"),
        PipelineError::Arch(a) => {
            let numerical = matches!(a, dentreg::arch::ArchError::Correction { .. });
            let err = anyhow::Error::new(a).context("stitching correction");
            if numerical {
                Failure::Numerical(err)
            } else {
                Failure::Data(err)
            }
        }
    }
}

pub fn from_projection(e: ProjectionError, context: &str) -> Failure {
    let class = match &e {
        ProjectionError::InvalidInput(_) => Failure::Usage,
        ProjectionError::MissingNormals | ProjectionError::EmptyRoi { .. } | ProjectionError::InconsistentClasses(_) => Failure::Data,
        _ => Failure::Numerical,
    };
    class(anyhow::Error::new(e).context(context.to_string()))
}
