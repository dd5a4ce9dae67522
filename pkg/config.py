"""
CAC Lab Configuration
Central configuration loader for protocol constants, output paths and run settings.
"""
import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()


class Config:
    """Configuration settings for the CAC Lab."""

    # Output Configuration
    OUTPUT_DIR = os.getenv("CAC_LAB_OUTPUT_DIR", "results").strip()
    DEFAULT_FORMAT = "csv"

    # Run Configuration
    DEFAULT_SEEDS = int(os.getenv("CAC_LAB_SEEDS", "20"))
    WORKERS = int(os.getenv("CAC_LAB_WORKERS", "1"))
    VERBOSE = os.getenv("CAC_LAB_VERBOSE", "1").strip() not in ("0", "false", "no")
    LONG_RUN = os.getenv("CAC_LAB_LONG_RUN", "0").strip() in ("1", "true", "yes")

    # Self-Play Protocol
    EPISODES = 20_000
    DQN_EPISODES = 50_000
    WINDOW = 2_000  # steady-state window at the end of each phase
    WINDOW_SENSITIVITY = (1_000, 2_000, 5_000)
    TRACE_WINDOW = 200

    # Learner Defaults
    EPSILON = 0.15
    ALPHA = 0.1
    PG_LEARNING_RATE = 0.01
    PPO_CLIP = 0.2
    PPO_ENTROPY_COEF = 0.01
    NFSP_ETA = 0.1
    PSRO_ORACLE_EPISODES = 4_000
    PSRO_POPULATION = 5

    # DQN
    DQN_HIDDEN = 64
    DQN_LEARNING_RATE = 1e-3
    DQN_BUFFER = 10_000
    DQN_BATCH = 32
    DQN_TARGET_UPDATE = 500
    DQN_EPSILON_FINAL = 0.01

    # CFR iteration budgets per game
    CFR_ITERATIONS = {
        "kuhn": 10_000,
        "leduc": 1_500,
        "leduc4": 1_000,
        "liars_dice": 300,
        "matching_pennies": 2_000,
        "negotiation": 2_000,
    }
    CFR_CHECKPOINT = 1_000

    # Statistics
    BOOTSTRAP_RESAMPLES = 10_000
    CONFIDENCE = 0.95
    STATS_SEED = int(os.getenv("CAC_LAB_STATS_SEED", "20240917"))

    # Expected-result tolerance classes
    TOLERANCES = {
        "solver": 0.005,
        "tabular": 0.03,
        "dqn": 0.05,
    }

    @classmethod
    def cfr_iterations(cls, game_name: str) -> int:
        """Get the CFR iteration budget for a game."""
        return cls.CFR_ITERATIONS.get(game_name, 1_000)

    @classmethod
    def validate(cls) -> dict:
        """Validate that all config values are usable."""
        issues = []

        if cls.DEFAULT_SEEDS < 1:
            issues.append("CAC_LAB_SEEDS must be at least 1")
        if cls.WORKERS < 1:
            issues.append("CAC_LAB_WORKERS must be at least 1")
        if not 0.0 <= cls.EPSILON <= 1.0:
            issues.append("EPSILON must lie in [0, 1]")
        if cls.WINDOW < 1 or cls.TRACE_WINDOW < 1:
            issues.append("evaluation windows must be positive")
        if not cls.OUTPUT_DIR:
            issues.append("CAC_LAB_OUTPUT_DIR is empty")
        else:
            parent = os.path.dirname(os.path.abspath(cls.OUTPUT_DIR))
            if not os.access(parent, os.W_OK):
                issues.append(f"output directory parent not writable: {parent}")

        return {
            "valid": len(issues) == 0,
            "issues": issues
        }


if __name__ == "__main__":
    # Test configuration loading
    result = Config.validate()
    if result["valid"]:
        print("✅ All configuration values are set!")
    else:
        print("⚠️  Configuration problems:")
        for issue in result["issues"]:
            print(f"   - {issue}")

    print(f"\n📂 Output directory: {Config.OUTPUT_DIR}")
    print(f"🎲 Seeds: {Config.DEFAULT_SEEDS}   Workers: {Config.WORKERS}")
