from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    # Quadrature
    QUAD_RTOL: float = 1e-10
    TAIL_RTOL: float = 1e-12
    MAX_DECADES: int = 60
    QUAD_LIMIT: int = 200
    SLAB_GL_NODES: int = 16
    ANGLE_GL_NODES: int = 48
    SPHERE_RULE_NODES: int = 12
    SPHERE_RULE_MAX_DIRECTIONS: int = 20000

    # Model domain
    PATCH_RADIUS: float = 1.0
    DOMAIN_RADIUS: float = 2.0

    # Epsilon window
    EPS_MIN: float = 1e-3
    EPS_MAX: float = 1e-2
    EPS_POINTS: int = 8
    WINDOW_POINTS: int = 6

    # Acceptance
    COEFF_RTOL: float = 0.05
    EXPONENT_ATOL: float = 0.02
    RATE_ATOL: float = 0.15
    C0_RTOL: float = 1e-6
    LOG_SIGNAL_RATIO: float = 5.0
    FIT_MAX_CONDITION: float = 1e12
    IDENTITY_RTOL: float = 1e-9
    SIGN_RTOL: float = 1e-8

    # Solver
    MESH_SIZE: int = 1000
    MESH_GRADING: float = 0.5
    TOL_GRAD: float = 1e-9
    NEWTON_SWITCH: float = 1e-3
    MAX_DESCENT_ITER: int = 5000
    MAX_NEWTON_ITER: int = 50
    MULTISTART: int = 3
    TIE_TOL: float = 1e-10

    # Campaign
    WORKERS: int = 1
    OUTPUT_DIR: str = "./out"
    LOG_LEVEL: str = "INFO"

    class Config:
        env_file = ".env"


settings = Settings()
