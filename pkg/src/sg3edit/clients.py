"""External-helper client protocols: landmarks, classifiers, embeddings.

Scoring and embedding requests use one line-delimited JSON protocol over a
subprocess's stdio or a local TCP socket:

    request:  {"kind": "score", "attribute": ..., "image": [...], "shape": [...]}
              {"kind": "embed_image", "image": [...], "shape": [...]}
              {"kind": "embed_text", "text": ...}
    response: {"score": <float>} | {"embedding": [...]} | {"error": <str>}

In-process adapters cover hermetic tests; nothing here bundles a model.
"""

from __future__ import annotations

import json
import socket
import subprocess
from typing import Callable, Protocol

import numpy as np

from sg3edit.errors import NoFaceDetected, Sg3EditError
from sg3edit.geometry import LandmarkSet


class LandmarkDetector(Protocol):
    def detect(self, image: np.ndarray, frame_index: int | None = None) -> LandmarkSet: ...


class ClassifierClient(Protocol):
    def score(self, image: np.ndarray, attribute: str) -> float: ...


class EmbeddingClient(Protocol):
    def embed_image(self, image: np.ndarray) -> np.ndarray: ...

    def embed_text(self, text: str) -> np.ndarray: ...


class StaticLandmarks:
    """Landmarks supplied up front (per frame index), e.g. from a sidecar file."""

    def __init__(self, landmarks: list[LandmarkSet | None]):
        self._landmarks = landmarks

    @classmethod
    def from_json(cls, path) -> "StaticLandmarks":
        records = json.loads(open(path, "r", encoding="utf-8").read())
        out = []
        for rec in records:
            if rec is None:
                out.append(None)
            else:
                out.append(
                    LandmarkSet(
                        left_eye=tuple(rec["left_eye"]),
                        right_eye=tuple(rec["right_eye"]),
                        mouth=tuple(rec["mouth"]) if rec.get("mouth") else None,
                    )
                )
        return cls(out)

    def detect(self, image: np.ndarray, frame_index: int | None = None) -> LandmarkSet:
        idx = frame_index if frame_index is not None else 0
        if idx >= len(self._landmarks) or self._landmarks[idx] is None:
            raise NoFaceDetected(frame_index=idx)
        return self._landmarks[idx]


class CallableClassifier:
    def __init__(self, fn: Callable[[np.ndarray, str], float]):
        self._fn = fn

    def score(self, image: np.ndarray, attribute: str) -> float:
        return float(self._fn(image, attribute))


class CallableEmbedding:
    def __init__(self, image_fn: Callable[[np.ndarray], np.ndarray], text_fn: Callable[[str], np.ndarray]):
        self._image_fn = image_fn
        self._text_fn = text_fn

    def embed_image(self, image: np.ndarray) -> np.ndarray:
        return np.asarray(self._image_fn(image), dtype=np.float64)

    def embed_text(self, text: str) -> np.ndarray:
        return np.asarray(self._text_fn(text), dtype=np.float64)


def _image_payload(image: np.ndarray) -> dict:
    arr = np.asarray(image, dtype=np.float64)
    return {"image": arr.ravel().tolist(), "shape": list(arr.shape)}


def _check(response: dict) -> dict:
    if "error" in response:
        raise Sg3EditError(f"client error: {response['error']}")
    return response


class SubprocessJSONClient:
    """Classifier/embedding client speaking the line-JSON protocol over stdio."""

    def __init__(self, command: list[str]):
        self._proc = subprocess.Popen(
            command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )

    def _roundtrip(self, request: dict) -> dict:
        if self._proc.poll() is not None:
            raise Sg3EditError("client subprocess exited")
        self._proc.stdin.write(json.dumps(request) + "\n")
        self._proc.stdin.flush()
        line = self._proc.stdout.readline()
        if not line:
            raise Sg3EditError("client subprocess closed its stdout")
        return _check(json.loads(line))

    def score(self, image: np.ndarray, attribute: str) -> float:
        req = {"kind": "score", "attribute": attribute, **_image_payload(image)}
        return float(self._roundtrip(req)["score"])

    def embed_image(self, image: np.ndarray) -> np.ndarray:
        req = {"kind": "embed_image", **_image_payload(image)}
        return np.asarray(self._roundtrip(req)["embedding"], dtype=np.float64)

    def embed_text(self, text: str) -> np.ndarray:
        return np.asarray(
            self._roundtrip({"kind": "embed_text", "text": text})["embedding"], dtype=np.float64
        )

    def close(self) -> None:
        if self._proc.poll() is None:
            self._proc.stdin.close()
            self._proc.terminate()
            self._proc.wait(timeout=5)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class SocketJSONClient:
    """Same line-JSON protocol over a local TCP socket."""

    def __init__(self, host: str, port: int, timeout: float = 30.0):
        self._sock = socket.create_connection((host, port), timeout=timeout)
        self._reader = self._sock.makefile("r", encoding="utf-8")
        self._writer = self._sock.makefile("w", encoding="utf-8")

    def _roundtrip(self, request: dict) -> dict:
        self._writer.write(json.dumps(request) + "\n")
        self._writer.flush()
        line = self._reader.readline()
        if not line:
            raise Sg3EditError("client socket closed")
        return _check(json.loads(line))

    score = SubprocessJSONClient.score
    embed_image = SubprocessJSONClient.embed_image
    embed_text = SubprocessJSONClient.embed_text

    def close(self) -> None:
        self._sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def serve_stdio(score_fn=None, embed_image_fn=None, embed_text_fn=None) -> None:
    """Run a worker loop for the stdio side of the protocol (used by helpers)."""
    import sys

    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        try:
            req = json.loads(line)
            kind = req["kind"]
            if kind == "score":
                image = np.asarray(req["image"], dtype=np.float64).reshape(req["shape"])
                resp = {"score": float(score_fn(image, req.get("attribute", "")))}
            elif kind == "embed_image":
                image = np.asarray(req["image"], dtype=np.float64).reshape(req["shape"])
                resp = {"embedding": np.asarray(embed_image_fn(image)).ravel().tolist()}
            elif kind == "embed_text":
                resp = {"embedding": np.asarray(embed_text_fn(req["text"])).ravel().tolist()}
            else:
                resp = {"error": f"unknown kind {kind!r}"}
        except Exception as exc:  # report, keep serving
            resp = {"error": str(exc)}
        sys.stdout.write(json.dumps(resp) + "\n")
        sys.stdout.flush()
