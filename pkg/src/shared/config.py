from typing import Optional
from pydantic_settings import BaseSettings, SettingsConfigDict
from pydantic import Field


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix="DDNN_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",  # Ignore extra fields from environment
    )

    # Logging
    log_level: str = Field(default="INFO")
    log_format: str = Field(default="json", description="json or text")

    # Dictionary layers
    ridge: float = Field(default=1e-8, ge=0.0, description="Ridge weight for every least-squares solve")
    tol: float = Field(default=1e-6, gt=0.0, description="Relative objective change that stops a layer")
    max_iters: int = Field(default=100, ge=1)
    solver: str = Field(default="mod")
    coder: str = Field(default="ridge_ls")
    sparsity: int = Field(default=1, ge=1, description="Nonzeros per code column for the omp coder")

    # Activation inversion
    activation: str = Field(default="tanh")
    clamp_margin: float = Field(default=1e-6, gt=0.0)
    noise_sigma: float = Field(default=1e-4, ge=0.0)

    # Supervised layers
    mu: float = Field(default=1.0, ge=0.0, description="Weight of the label terms in the final layer")
    eta: float = Field(default=0.0, ge=0.0, description="Mutual incoherence weight")
    lam: float = Field(default=1.0, gt=0.0, description="Logistic classification weight")
    logistic_step: float = Field(default=0.1, gt=0.0)
    logistic_inner_iters: int = Field(default=20, ge=1)

    # Data
    normalization: str = Field(default="unit_scale")
    label_column: str = Field(default="label")

    # Run
    variant: str = Field(default="ddnn1")
    seed: int = Field(default=0, ge=0)
    metrics_format: str = Field(default="table")
    metrics_file: Optional[str] = Field(default=None, description="Prometheus textfile written after each command")


settings = Settings()
