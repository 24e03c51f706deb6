from core.planning.cem import CemParams, CemPlanner, Predictor, plan, rollout_score, score_batch

__all__ = ["CemParams", "CemPlanner", "Predictor", "plan", "rollout_score", "score_batch"]
