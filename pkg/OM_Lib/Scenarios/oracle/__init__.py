from .oracle import OracleCheck, run_oracle_check
