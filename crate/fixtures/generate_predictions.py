"""Build fixtures/adult.csv from the UCI Adult training file (adult.data).

Usage: python3 generate_predictions.py path/to/adult.data adult.csv
"""
import sys

import numpy as np
import pandas as pd
from sklearn.compose import ColumnTransformer
from sklearn.neural_network import MLPClassifier
from sklearn.preprocessing import OneHotEncoder, StandardScaler

COLUMNS = [
    "age", "workclass", "fnlwgt", "education", "education-num", "marital-status",
    "occupation", "relationship", "race", "sex", "capital-gain", "capital-loss",
    "hours-per-week", "native-country", "income",
]
NUMERIC = ["age", "fnlwgt", "education-num", "capital-gain", "capital-loss", "hours-per-week"]


def main(src, dst):
    data = pd.read_csv(src, names=COLUMNS, skipinitialspace=True, dtype=str, keep_default_na=False)
    features = data[COLUMNS[:-1]].copy()
    for col in NUMERIC:
        features[col] = features[col].astype(float)
    categorical = [c for c in COLUMNS[:-1] if c not in NUMERIC]

    # Class 1 is "<=50K", class 0 is ">50K".
    target = (data["income"] == "<=50K").astype(int).values

    encoder = ColumnTransformer([
        ("cat", OneHotEncoder(handle_unknown="ignore"), categorical),
        ("num", StandardScaler(), NUMERIC),
    ])
    x = encoder.fit_transform(features)
    model = MLPClassifier(hidden_layer_sizes=(16,), max_iter=200, random_state=0)
    model.fit(x, target)

    score = model.predict_proba(x)[:, 1]
    data["prediction"] = (score >= 0.5).astype(int)
    data["score"] = np.round(score, 6)
    data.to_csv(dst, index=False)
    print("accuracy", (data["prediction"].values == target).mean())


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
