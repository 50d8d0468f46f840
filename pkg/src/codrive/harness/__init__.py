from .experiment import Runner, SeedResult, evaluate, run_experiment, run_seed
from .scenario import ScenarioConfig, load_scenario, parse_scenario
