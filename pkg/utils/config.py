"""
Configuration management for the tscoreset toolkit
"""

import os
from typing import Dict, Any, Optional

class Config:
    """Configuration manager for coreset construction and fitting runs"""

    def __init__(self):
        self.config = self._load_config()

    def _load_config(self) -> Dict[str, Any]:
        """Load configuration from environment variables and defaults"""
        return {
            # Parallelism (0 = one worker per CPU)
            'TSC_THREADS': os.getenv('TSC_THREADS'),

            # Storage
            'DATA_DIR': os.getenv('DATA_DIR', 'data'),
            'RUN_LEDGER': os.getenv('RUN_LEDGER'),

            # Logging
            'LOG_LEVEL': os.getenv('LOG_LEVEL', 'INFO'),
            'LOG_FILE': os.getenv('LOG_FILE'),

            # k-means reduction
            'KMEANS_RESTARTS': int(os.getenv('KMEANS_RESTARTS', '3')),

            # EM solver
            'EM_MAX_ITERS': int(os.getenv('EM_MAX_ITERS', '100')),
            'EM_TOL': float(os.getenv('EM_TOL', '1e-6')),
            'EM_N_INIT': int(os.getenv('EM_N_INIT', '1')),

            # Leading constants hidden in the O(.) of the coreset sizes
            'SIZE_CONSTANTS': {
                'c_entity': float(os.getenv('TSC_C_ENTITY', '1.0')),
                'c_time': float(os.getenv('TSC_C_TIME', '1.0')),
            },

            # Named dataset shapes
            'PRESETS': {
                'synthetic1': {'n_entities': 500, 'series_len': 500, 'd': 2, 'k': 3, 'lambda_param': 0.01},
                'synthetic2': {'n_entities': 200, 'series_len': 1250, 'd': 2, 'k': 3, 'lambda_param': 0.01},
                'desk': {'n_entities': 200, 'series_len': 200, 'd': 2, 'k': 3, 'lambda_param': 0.01},
            },
        }

    def get(self, key: str, default: Any = None) -> Any:
        """Get configuration value by key"""
        return self.config.get(key, default)

    def set(self, key: str, value: Any) -> None:
        """Set configuration value"""
        self.config[key] = value

    def get_preset(self, name: str) -> Dict[str, Any]:
        """Get a named dataset shape"""
        presets = self.get('PRESETS')
        if name not in presets:
            raise ValueError(f"Unknown preset '{name}' (known: {', '.join(sorted(presets))})")
        return dict(presets[name])

    def threads(self, cli_value: Optional[int] = None) -> int:
        """Resolve the worker count; TSC_THREADS wins over the command line"""
        env_value = self.get('TSC_THREADS')
        value = int(env_value) if env_value not in (None, '') else (cli_value or 0)
        if value < 0:
            raise ValueError(f"Thread count must be >= 0, got {value}")
        if value == 0:
            value = os.cpu_count() or 1
        return value

    def get_ledger_path(self) -> Optional[str]:
        """Get the sqlite path of the run ledger, if one is configured"""
        url = self.get('RUN_LEDGER')
        if not url:
            return None
        # Remove 'sqlite:///' prefix if present
        if url.startswith('sqlite:///'):
            url = url[10:]
        return url

# Global configuration instance
config = Config()
