import numpy as np

from ctpp.core.exceptions import SpecError
from ctpp.core.nncore.layers import uniform_init
from ctpp.core.nncore.params import ParamStore


class DistDecoder:
    """
    Distribution decoder parameters: mark scores W_pi and the three
    mixture heads (weights, log-scales, locations) with M components.
    """

    def __init__(
        self,
        store: ParamStore,
        hidden_dim: int,
        num_marks: int,
        num_components: int,
        rng: np.random.Generator,
        mark_bias: bool = False,
    ):
        if num_components < 1:
            raise SpecError("the mixture needs at least one component")
        self.num_marks = num_marks
        self.num_components = num_components
        self.w_pi = store.add("decoder.w_pi", uniform_init(rng, (hidden_dim, num_marks), hidden_dim), "decoder")
        self.b_pi = store.add("decoder.b_pi", np.zeros(num_marks), "decoder") if mark_bias else None
        heads = {}
        for head in ("w", "s", "mu"):
            heads[f"w_{head}"] = store.add(
                f"decoder.w_{head}", uniform_init(rng, (hidden_dim, num_components), hidden_dim), "decoder"
            )
            heads[f"b_{head}"] = store.add(f"decoder.b_{head}", np.zeros(num_components), "decoder")
        self.w_w, self.b_w = heads["w_w"], heads["b_w"]
        self.w_s, self.b_s = heads["w_s"], heads["b_s"]
        self.w_mu, self.b_mu = heads["w_mu"], heads["b_mu"]


class PredDecoder:
    """Prediction decoder parameters: mark scores W_pi and the interval head (W_t, b_t)."""

    def __init__(
        self,
        store: ParamStore,
        hidden_dim: int,
        num_marks: int,
        rng: np.random.Generator,
        mark_bias: bool = False,
    ):
        self.num_marks = num_marks
        self.w_pi = store.add("decoder.w_pi", uniform_init(rng, (hidden_dim, num_marks), hidden_dim), "decoder")
        self.b_pi = store.add("decoder.b_pi", np.zeros(num_marks), "decoder") if mark_bias else None
        self.w_t = store.add("decoder.w_t", uniform_init(rng, (hidden_dim, 1), hidden_dim), "decoder")
        self.b_t = store.add("decoder.b_t", np.zeros(1), "decoder")
