"""Published reference values, shown beside our results and never asserted."""

TABLE1_MAE = {
    ("linreg", "rtt_ms"): 3.878,
    ("linreg", "bandwidth_mbps"): 24.078,
    ("lightgbm", "bandwidth_mbps"): 21.470,
}
TABLE2_F1 = 0.860541969596
TABLE3_AUC = 0.774846939561274
TABLE5_SATISFACTION_PCT = {
    "Video conference": 24,
    "Online gaming": 21,
    "File transfer": 30,
    "Browsing": 26,
    "Streaming": 21,
}
TABLE6_ACCURACY = 0.9914


def as_dict() -> dict:
    return {
        "task1_mae": [{"model": m, "target": t, "mae": v} for (m, t), v in TABLE1_MAE.items()],
        "task2_f1": TABLE2_F1,
        "task3_auc": TABLE3_AUC,
        "task4_satisfaction_pct": dict(TABLE5_SATISFACTION_PCT),
        "task5_accuracy": TABLE6_ACCURACY,
    }
