"""Configuration settings for the calibration toolkit."""

import os

from dotenv import load_dotenv

# Load environment variables
load_dotenv()


def _env_int(name: str, default: int) -> int:
    value = os.getenv(name)
    if value is None or value.strip() == "":
        return default
    try:
        return int(value)
    except ValueError:
        return default


def _env_float(name: str, default: float) -> float:
    value = os.getenv(name)
    if value is None or value.strip() == "":
        return default
    try:
        return float(value)
    except ValueError:
        return default


class CalibrationConfig:
    """Configuration class for the calibration toolkit."""

    # Reproducibility
    DEFAULT_SEED = _env_int("BINNING_SEED", 0)

    # Parallelism (0 means one worker per core)
    THREADS = _env_int("BINNING_THREADS", 0)

    # Assessment
    GRID_SIZE = _env_int("BINNING_GRID_SIZE", 1001)

    # Calibrator defaults
    DEFAULT_DELTA = _env_float("BINNING_DELTA", 1e-10)
    DEFAULT_SPLIT_FRACTION = 0.5
    DEFAULT_BINS = 10
    DEFAULT_ALPHA = 0.1

    LOG_LEVEL = os.getenv("BINNING_LOG_LEVEL", "WARNING")

    # Available calibrators
    CALIBRATORS = [
        "umd",
        "umd-original",
        "umd-randomized",
        "ums",
        "fixed-width",
        "isotonic",
        "scaling-binning",
    ]

    CALIBRATOR_DESCRIPTIONS = {
        "umd": "Uniform-mass binning, same data for edges and biases",
        "umd-original": "UMD with the boundary label kept in each bin b < B",
        "umd-randomized": "UMD with score and bias randomization (distinct biases)",
        "ums": "Uniform-mass binning with sample splitting",
        "fixed-width": "B equal-width bins on [0, 1]",
        "isotonic": "Pool-adjacent-violators isotonic regression",
        "scaling-binning": "UMD edges, biases averaged from Platt-scaled scores",
    }

    @classmethod
    def get_calibrator_description(cls, kind: str) -> str:
        """Get description for a calibrator."""
        return cls.CALIBRATOR_DESCRIPTIONS.get(kind, f"{kind}: unknown calibrator")

    @classmethod
    def resolved_threads(cls) -> int:
        """Worker count with 0 mapped to the number of available cores."""
        if cls.THREADS > 0:
            return cls.THREADS
        return os.cpu_count() or 1

    @classmethod
    def validate_config(cls) -> bool:
        """Validate that configured values are usable."""
        problems = []

        if cls.GRID_SIZE < 2:
            problems.append(f"BINNING_GRID_SIZE must be >= 2, got {cls.GRID_SIZE}")
        if not cls.DEFAULT_DELTA > 0:
            problems.append(f"BINNING_DELTA must be > 0, got {cls.DEFAULT_DELTA}")
        if cls.THREADS < 0:
            problems.append(f"BINNING_THREADS must be >= 0, got {cls.THREADS}")
        if cls.DEFAULT_SEED < 0:
            problems.append(f"BINNING_SEED must be >= 0, got {cls.DEFAULT_SEED}")

        if problems:
            print("❌ Invalid configuration:")
            for problem in problems:
                print(f"   - {problem}")
            print("\nPlease fix these in your .env file or environment.")
            return False

        return True

    @classmethod
    def show_config_info(cls):
        """Display current configuration information."""
        print("🔧 CALIBRATION CONFIGURATION")
        print("=" * 50)
        print(f"Default seed: {cls.DEFAULT_SEED}")
        print(f"Threads: {cls.resolved_threads()}")
        print(f"Grid size: {cls.GRID_SIZE}")
        print(f"Delta: {cls.DEFAULT_DELTA}")
        print(f"Log level: {cls.LOG_LEVEL}")

        print("\n📦 AVAILABLE CALIBRATORS:")
        for kind in cls.CALIBRATORS:
            print(f"   {kind}: {cls.get_calibrator_description(kind)}")


if __name__ == "__main__":
    # Show configuration when run directly
    CalibrationConfig.show_config_info()
    print(f"\nConfiguration valid: {CalibrationConfig.validate_config()}")
