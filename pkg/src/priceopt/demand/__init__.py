from .arima import ArimaFitError, acf, fit_arima, forecast_arima, pacf, select_arima_order
from .artifact import KINDS, ModelArtifact, TrainingError
from .ensemble import ENSEMBLE_MEMBERS, ensemble_predict, fit_ensemble, grid_search_cv, predict
from .linear import fit_elastic_net
from .lstm import fit_lstm, lstm_loss_and_grads, predict_lstm
from .metrics import EvalReport, evaluate_predictions
from .mlp import fit_mlp, mlp_loss_and_grads
from .trees import build_tree, fit_gbt, fit_random_forest, predict_tree, prune_tree

__all__ = [
    "ArimaFitError", "ENSEMBLE_MEMBERS", "EvalReport", "KINDS", "ModelArtifact", "TrainingError",
    "acf", "build_tree", "ensemble_predict", "evaluate_predictions", "fit_arima", "fit_elastic_net",
    "fit_ensemble", "fit_gbt", "fit_lstm", "fit_mlp", "fit_random_forest", "forecast_arima",
    "grid_search_cv", "lstm_loss_and_grads", "mlp_loss_and_grads", "pacf", "predict",
    "predict_lstm", "predict_tree", "prune_tree", "select_arima_order",
]
