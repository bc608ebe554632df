from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest
from PIL import Image

from signeval.matching import MockBigramEmbedder
from signeval.model import Direction, LabelKind, NavCue


@pytest.fixture
def provider():
    return MockBigramEmbedder()


def write_json(path: Path, doc) -> Path:
    path.write_text(json.dumps(doc, ensure_ascii=False, indent=2), encoding="utf-8")
    return path


def cue(place: str, kind: str, direction: str) -> dict:
    return {"place": place, "kind": kind, "direction": direction}


def gt_image(image_id: str, signs: list[dict], file: str | None = None,
             width: int = 800, height: int = 600) -> dict:
    return {
        "image_id": image_id,
        "file": file or f"{image_id}.png",
        "width": width,
        "height": height,
        "signs": signs,
    }


def gt_sign(sign_id: str, bbox: list, cues: list[dict], readable: bool = True) -> dict:
    return {"sign_id": sign_id, "bbox": bbox, "readable": readable, "cues": cues}


def pred_sign(bbox: list, confidence: float | None = None, cues: list[dict] | None = None,
              sign_id: str | None = None) -> dict:
    sign: dict = {"bbox": bbox}
    if confidence is not None:
        sign["confidence"] = confidence
    if sign_id is not None:
        sign["sign_id"] = sign_id
    sign["cues"] = cues or []
    return sign


def make_cue(place: str, kind: LabelKind | str, direction: Direction | str) -> NavCue:
    return NavCue(
        place=place,
        kind=LabelKind(kind),
        direction=Direction(direction) if not isinstance(direction, Direction) else direction,
    )


# ---------------------------------------------------------------------------
# Closed-loop fixture: a 4-image dataset whose signs the stub backends echo
# ---------------------------------------------------------------------------

CLOSED_LOOP_IMAGES = [
    # (image_id, sign_id, bbox, cues) — one sign per image so the AR@1 cap
    # cannot clip anything; areas hit the S / M / L / L buckets.
    ("img1", "s1", [10, 10, 40, 40], [
        cue("Ward 63", "text", "left"),
        cue("Lift", "symbol", "straight"),
    ]),
    ("img2", "s1", [100, 100, 164, 164], [
        cue("Taxi Stand", "symbol", "no-direction"),
    ]),
    ("img3", "s1", [50, 50, 450, 350], [
        cue("Tower B", "text", "straight-right"),
    ]),
    ("img4", "s1", [0, 0, 100, 100], []),  # readable, purely pictorial
]


def build_closed_loop_dataset(root: Path) -> Path:
    """Ground-truth file plus PNG images for the closed-loop tests.

    Each image gets a distinct color so image and crop payloads never
    collide in the payload-keyed stub backends.
    """
    images = []
    for index, (image_id, sign_id, bbox, cues) in enumerate(CLOSED_LOOP_IMAGES):
        color = (40 + 50 * index, 90, 140 + 20 * index)
        Image.new("RGB", (800, 600), color).save(root / f"{image_id}.png")
        images.append(gt_image(image_id, [gt_sign(sign_id, bbox, cues)]))
    return write_json(root / "gt.json", {"images": images})


@pytest.fixture
def closed_loop_dataset(tmp_path):
    return build_closed_loop_dataset(tmp_path)


# ---------------------------------------------------------------------------
# Stub HTTP backends implementing the detector/recognizer/embedder contracts
# ---------------------------------------------------------------------------


class StubBackendServer:
    """Local HTTP server for pipeline tests.

    Routes: /detect (boxes by image payload), /recognize (text by image
    payload), /embed (bigram vectors). Responses are keyed by the
    request's image_b64 so the stub can echo per-sign ground truth; a
    default applies to unknown payloads. Failures can be injected.
    """

    def __init__(self):
        self.detect_responses: dict[str, dict] = {}
        self.default_detect: dict = {"boxes": [], "scores": []}
        self.recognize_responses: dict[str, str] = {}
        self.default_recognize: str = "[]"
        self.fail_next: dict[str, int] = {"detect": 0, "recognize": 0, "embed": 0}
        self.calls: dict[str, int] = {"detect": 0, "recognize": 0, "embed": 0}
        self.last_request: dict[str, dict] = {}
        self._embedder = MockBigramEmbedder()

        outer = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def do_POST(self):
                length = int(self.headers.get("Content-Length", "0"))
                payload = json.loads(self.rfile.read(length))
                route = self.path.strip("/")
                outer.calls[route] = outer.calls.get(route, 0) + 1
                outer.last_request[route] = {
                    "headers": dict(self.headers.items()),
                    "payload": payload,
                }
                if outer.fail_next.get(route, 0) > 0:
                    outer.fail_next[route] -= 1
                    self.send_error(503, "injected failure")
                    return
                if route == "detect":
                    body = outer.detect_responses.get(payload["image_b64"], outer.default_detect)
                elif route == "recognize":
                    text = outer.recognize_responses.get(
                        payload["image_b64"], outer.default_recognize
                    )
                    body = {"text": text}
                elif route == "embed":
                    vectors = [outer._embedder.embed(text).tolist() for text in payload["input"]]
                    body = {"vectors": vectors}
                else:
                    self.send_error(404)
                    return
                raw = json.dumps(body).encode("utf-8")
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(raw)))
                self.end_headers()
                self.wfile.write(raw)

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    @property
    def base_url(self) -> str:
        host, port = self._server.server_address
        return f"http://{host}:{port}"

    def url(self, route: str) -> str:
        return f"{self.base_url}/{route}"

    def shutdown(self):
        self._server.shutdown()
        self._server.server_close()


@pytest.fixture
def stub_server():
    server = StubBackendServer()
    yield server
    server.shutdown()
