# qestim_errors.py - 推定ツールキット共通の例外定義


class QEstimError(Exception):
    """全エラーの基底クラス"""
    pass


class NonHermitian(QEstimError):
    pass


class DimensionMismatch(QEstimError):
    pass


class InvalidState(QEstimError):
    """密度行列として不正（非エルミート・トレース≠1・負の固有値）"""
    pass


class DegenerateProbability(QEstimError):
    """p_j ≈ 0 なのに ∂p_j ≠ 0 で Fisher 項が定義できない"""
    pass


class DivergentVariance(QEstimError):
    """|∂θ<A>| ≈ 0 : 観測量がパラメータ情報を持たない"""
    pass


class NonSaturatingReference(QEstimError):
    pass


class MissingCoefficients(QEstimError):
    pass


class StepTooLarge(QEstimError):
    """Lindblad 積分でトレースがずれた → dt を小さくする"""
    pass


class ConvergenceError(QEstimError):
    pass


class SpecError(QEstimError):
    """SweepSpec / コマンド設定の内容エラー"""
    pass
