"""hedgeplots: renders hedgelab summary CSVs into figures.

Input is the delimited summary schema
(strategy,config_id,mean_std,var95,cvar95,mean_cost,premium_income,
n_episodes,seed); output is grouped bar charts of the three risk metrics
per strategy and cost-vs-profit charts. Inputs are never modified.
"""

__version__ = "0.1.0"
