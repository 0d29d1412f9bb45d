"""hedgelab: a laboratory for dynamic vega hedging of an option liability book.

Subsystems:
    market     - SABR shock generation and price/volatility path simulation
    pricing    - Hagan-approximation implied vol, Black-Scholes prices and Greeks
    portfolio  - liability/hedge books, Poisson client arrivals, mark-to-market
    env        - daily hedging environment (action bound, reward, delta neutralization)
    nets       - minimal feed-forward networks on flat parameter vectors
    distrl     - quantile critic, Gaussian policy actor, gradients, replay buffer
    optimizer  - Nesterov-accelerated adaptive-moment optimizer and its validators
    baselines  - rule-based delta and delta-vega strategies
    metrics    - Mean-STD, VaR-95%, CVaR-95%, premium/cost accounting
    config     - configuration files, defaults, run manifests
    train      - training loop
    evaluate   - evaluation rollouts and parameter sweeps
    cli        - command line interface
"""

__version__ = "0.1.0"
