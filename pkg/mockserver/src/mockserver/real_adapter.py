"""Best-effort adapter that serves a real local vision model, if present.

Same wire contract as the mock modes: the raw decoded model string is
returned unmodified as the response body (classifying it is the client's
job).  Model loading is lazy and failures surface as 500s with a diagnostic
body.  This adapter is a convenience for operators with weights on disk; it
is not part of the tested contract surface.
"""

from __future__ import annotations

import io
import threading

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse

PROMPT = "Analyze this clothing item image and return structured fashion tags as JSON."


class _LazyModel:
    def __init__(self, weights_ref: str, deterministic: bool = True):
        self.weights_ref = weights_ref
        self.deterministic = deterministic
        self._lock = threading.Lock()
        self._bundle = None
        self._error: str | None = None

    def _load(self):
        from transformers import AutoModelForCausalLM, AutoProcessor  # heavyweight

        processor = AutoProcessor.from_pretrained(self.weights_ref, trust_remote_code=True)
        model = AutoModelForCausalLM.from_pretrained(self.weights_ref, trust_remote_code=True)
        model.eval()
        return processor, model

    def generate(self, image_bytes: bytes) -> str:
        with self._lock:
            if self._error:
                raise RuntimeError(self._error)
            if self._bundle is None:
                try:
                    self._bundle = self._load()
                except Exception as exc:
                    self._error = f"model load failed: {exc}"
                    raise RuntimeError(self._error) from exc
        processor, model = self._bundle

        from PIL import Image

        image = Image.open(io.BytesIO(image_bytes)).convert("RGB")
        inputs = processor(text=PROMPT, images=image, return_tensors="pt")
        generated = model.generate(
            **inputs,
            max_new_tokens=256,
            num_beams=1,
            do_sample=not self.deterministic,
        )
        return processor.batch_decode(generated, skip_special_tokens=True)[0]


def create_real_app(weights_ref: str, deterministic: bool = True) -> FastAPI:
    app = FastAPI(title="fashiontag real-model adapter")
    runner = _LazyModel(weights_ref, deterministic)

    @app.get("/health")
    def health():
        return {"status": "ok", "mode": "real", "weights": weights_ref}

    @app.post("/analyze")
    async def analyze(request: Request):
        try:
            form = await request.form()
        except Exception:
            form = None
        upload = form.get("file") if form is not None else None
        if upload is None or isinstance(upload, str):
            return JSONResponse(
                {"error": "multipart file part 'file' is required"}, status_code=400
            )
        data = await upload.read()
        try:
            body = runner.generate(data)
        except Exception as exc:
            return JSONResponse({"error": str(exc)}, status_code=500)
        return PlainTextResponse(body, media_type="application/json")

    return app
