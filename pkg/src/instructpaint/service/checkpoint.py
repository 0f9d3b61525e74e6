"""Checkpoint persistence: a deterministic binary blob of named arrays with an
embedded JSON manifest, plus a human-readable sidecar manifest.

Layout: 8-byte magic | u64 manifest length | manifest JSON | raw array bytes.
Arrays are sorted by name and stored little-endian, so save(load(x)) is
byte-identical to save(x).
"""

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from ..config import (
    GenConfig,
    LocalizerConfig,
    ModelConfig,
    config_to_dict,
    gen_config_from_dict,
    model_config_from_dict,
    _coerce,
)
from ..models import ManipulatorModel
from ..text import Vocabulary

MAGIC = b"ICKP0001"
CHECKPOINT_VERSION = 1


class CheckpointError(RuntimeError):
    pass


def _to_numpy(value) -> np.ndarray:
    if isinstance(value, torch.Tensor):
        return value.detach().cpu().numpy()
    return np.asarray(value)


@dataclass
class CheckpointBundle:
    model_config: ModelConfig
    gen_config: GenConfig
    vocab_tokens: list[str]
    epoch: int
    seed: int
    dataset_hash: str
    split_encoders: bool
    arrays: dict[str, np.ndarray] = field(default_factory=dict)
    opt_steps: dict[str, dict[str, float]] = field(default_factory=dict)
    localizer_meta: dict | None = None

    @classmethod
    def from_training(cls, model: ManipulatorModel, model_config: ModelConfig,
                      gen_config: GenConfig, vocab: Vocabulary, epoch: int,
                      seed: int, dataset_hash: str, optimizers=None, localizer=None):
        bundle = cls(
            model_config=model_config,
            gen_config=gen_config,
            vocab_tokens=list(vocab.tokens),
            epoch=epoch,
            seed=seed,
            dataset_hash=dataset_hash,
            split_encoders=model.split_encoders,
        )
        for name, tensor in model.state_dict().items():
            bundle.arrays[f"model/{name}"] = _to_numpy(tensor)
        if optimizers:
            name_of = {id(p): n for n, p in model.named_parameters()}
            for label, opt in optimizers.items():
                steps: dict[str, float] = {}
                for group in opt.param_groups:
                    for p in group["params"]:
                        state = opt.state.get(p)
                        if not state:
                            continue
                        pname = name_of[id(p)]
                        steps[pname] = float(state["step"])
                        bundle.arrays[f"opt/{label}/{pname}/exp_avg"] = _to_numpy(state["exp_avg"])
                        bundle.arrays[f"opt/{label}/{pname}/exp_avg_sq"] = _to_numpy(state["exp_avg_sq"])
                bundle.opt_steps[label] = steps
        if localizer is not None:
            state = localizer.state()
            bundle.localizer_meta = {
                "classes": [list(c) for c in state["classes"]],
                "resolution": state["resolution"],
                "config": config_to_dict(state["config"]),
            }
            for name, arr in state["net"].items():
                bundle.arrays[f"localizer/{name}"] = np.asarray(arr)
        return bundle

    def build_vocab(self) -> Vocabulary:
        return Vocabulary(list(self.vocab_tokens))

    def build_model(self) -> ManipulatorModel:
        model = ManipulatorModel(self.model_config, split_encoders=self.split_encoders, seed=0)
        state = {}
        for name, arr in self.arrays.items():
            if name.startswith("model/"):
                state[name[len("model/"):]] = torch.from_numpy(np.array(arr))
        try:
            model.load_state_dict(state, strict=True)
        except RuntimeError as e:
            raise CheckpointError(f"checkpoint does not fit the model: {e}") from e
        model.eval()
        return model

    def build_localizer(self):
        if self.localizer_meta is None:
            return None
        from ..evalkit.localizer import localizer_from_state
        net = {}
        for name, arr in self.arrays.items():
            if name.startswith("localizer/"):
                net[name[len("localizer/"):]] = arr
        return localizer_from_state({
            "net": net,
            "classes": [tuple(c) for c in self.localizer_meta["classes"]],
            "resolution": self.localizer_meta["resolution"],
            "config": _coerce(LocalizerConfig, self.localizer_meta["config"]),
        })

    def load_optimizer_states(self, optimizers: dict, model: ManipulatorModel):
        """Restore Adam moments captured by from_training into optimizers built
        over the given (rebuilt) model."""
        name_of = {id(p): n for n, p in model.named_parameters()}
        for label, opt in optimizers.items():
            steps = self.opt_steps.get(label, {})
            by_name: dict[str, dict] = {}
            prefix = f"opt/{label}/"
            for key, arr in self.arrays.items():
                if key.startswith(prefix):
                    pname, kind = key[len(prefix):].rsplit("/", 1)
                    by_name.setdefault(pname, {})[kind] = arr
            params = {}
            for group in opt.param_groups:
                for p in group["params"]:
                    params[name_of[id(p)]] = p
            for pname, moments in by_name.items():
                p = params.get(pname)
                if p is None:
                    raise CheckpointError(f"optimizer state for unknown parameter {pname}")
                opt.state[p] = {
                    "step": torch.tensor(steps[pname]),
                    "exp_avg": torch.from_numpy(np.array(moments["exp_avg"])),
                    "exp_avg_sq": torch.from_numpy(np.array(moments["exp_avg_sq"])),
                }

    def manifest(self) -> dict:
        groups: dict[str, dict] = {}
        for name, arr in self.arrays.items():
            top = name.split("/", 1)[0]
            g = groups.setdefault(top, {"arrays": 0, "elements": 0})
            g["arrays"] += 1
            g["elements"] += int(arr.size)
        return {
            "checkpoint_version": CHECKPOINT_VERSION,
            "model_config": config_to_dict(self.model_config),
            "gen_config": config_to_dict(self.gen_config),
            "vocab": self.vocab_tokens,
            "epoch": self.epoch,
            "seed": self.seed,
            "dataset_hash": self.dataset_hash,
            "split_encoders": self.split_encoders,
            "opt_steps": self.opt_steps,
            "localizer": self.localizer_meta,
            "groups": groups,
        }


def save_checkpoint(bundle: CheckpointBundle, path) -> Path:
    path = Path(path)
    names = sorted(bundle.arrays)
    entries = []
    offset = 0
    for name in names:
        arr = np.ascontiguousarray(bundle.arrays[name])
        if arr.dtype.byteorder == ">":
            arr = arr.astype(arr.dtype.newbyteorder("<"))
        entries.append({
            "name": name,
            "dtype": arr.dtype.str,
            "shape": list(arr.shape),
            "offset": offset,
            "nbytes": int(arr.nbytes),
        })
        offset += arr.nbytes
    manifest = bundle.manifest()
    manifest["arrays"] = entries
    blob = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(blob)))
        f.write(blob)
        for name in names:
            arr = np.ascontiguousarray(bundle.arrays[name])
            f.write(arr.tobytes())
    sidecar = dict(manifest)
    sidecar.pop("arrays")
    Path(str(path) + ".manifest.json").write_text(json.dumps(sidecar, indent=2, sort_keys=True))
    return path


def load_checkpoint(path) -> CheckpointBundle:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"no checkpoint at {path}")
    data = path.read_bytes()
    if data[:8] != MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint (bad magic)")
    (manifest_len,) = struct.unpack("<Q", data[8:16])
    try:
        manifest = json.loads(data[16:16 + manifest_len])
    except json.JSONDecodeError as e:
        raise CheckpointError(f"corrupt checkpoint manifest in {path}: {e}") from e
    if manifest.get("checkpoint_version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint version {manifest.get('checkpoint_version')!r} "
            f"(supported: {CHECKPOINT_VERSION})")
    base = 16 + manifest_len
    arrays = {}
    for entry in manifest["arrays"]:
        start = base + entry["offset"]
        end = start + entry["nbytes"]
        if end > len(data):
            raise CheckpointError(f"truncated checkpoint {path}: array {entry['name']}")
        arr = np.frombuffer(data[start:end], dtype=np.dtype(entry["dtype"]))
        arrays[entry["name"]] = arr.reshape(entry["shape"]).copy()
    return CheckpointBundle(
        model_config=model_config_from_dict(manifest["model_config"]),
        gen_config=gen_config_from_dict(manifest["gen_config"]),
        vocab_tokens=list(manifest["vocab"]),
        epoch=manifest["epoch"],
        seed=manifest["seed"],
        dataset_hash=manifest["dataset_hash"],
        split_encoders=manifest["split_encoders"],
        arrays=arrays,
        opt_steps=manifest.get("opt_steps", {}),
        localizer_meta=manifest.get("localizer"),
    )


def ensure_matches(bundle: CheckpointBundle, expected: ModelConfig):
    """Reject a checkpoint whose hyperparameters differ from what the caller
    asked for, naming both sides."""
    stored = bundle.model_config
    diffs = []
    for name in ("resolution", "feat_channels", "feat_size", "word_hidden",
                 "history_hidden", "cond_dim", "embed_dim", "vocab_size"):
        a, b = getattr(stored, name), getattr(expected, name)
        if a != b:
            diffs.append(f"{name}: checkpoint has {a}, requested {b}")
    if diffs:
        raise CheckpointError("checkpoint/config mismatch: " + "; ".join(diffs))
