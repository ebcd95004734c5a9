"""HTTP service wrapping a loaded model bundle.

All images travel as base64-encoded PNGs inside JSON bodies. The bundle is
an immutable snapshot shared across handlers; no request mutates it.
"""

from __future__ import annotations

from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import images, inference

MAX_PAYLOAD_BYTES = 16 * 1024 * 1024


class PayloadTooLarge(ValueError):
    pass


class RefineRequest(BaseModel):
    sketch: str
    level: float = Field(ge=0.0, le=1.0)
    mask: str | None = None
    photo: str | None = None


class EditRequest(BaseModel):
    photo: str
    mask: str
    sketch: str
    level: float = Field(ge=0.0, le=1.0)
    outputs: list[str] = Field(
        default=["refined_sketch", "generated_photo", "final_photo"], alias="return"
    )

    model_config = {"populate_by_name": True}


class SynthRequest(BaseModel):
    sketch: str
    level: float = Field(ge=0.0, le=1.0)
    outputs: list[str] = Field(
        default=["refined_sketch", "generated_photo"], alias="return"
    )

    model_config = {"populate_by_name": True}


def _check_payload_size(limit, *fields):
    total = sum(len(f) for f in fields if f)
    if total > limit:
        raise PayloadTooLarge(f"payload of {total} bytes exceeds {limit}")


def _decode_sketch(b64):
    return images.unit_from_bytes(_require_gray(images.decode_png_b64(b64), "sketch"))


def _decode_mask(b64):
    gray = images.unit_from_bytes(_require_gray(images.decode_png_b64(b64), "mask"))
    return (gray >= 0.5).astype(float)


def _decode_photo(b64):
    arr = images.decode_png_b64(b64)
    if arr.ndim != 3:
        raise images.ImageError("photo must be an RGB PNG")
    return images.signed_from_bytes(arr)


def _require_gray(arr, what):
    if arr.ndim != 2:
        raise images.ImageError(f"{what} must be a grayscale PNG")
    return arr


def create_app(bundle: inference.ModelBundle,
               max_payload_bytes: int = MAX_PAYLOAD_BYTES) -> FastAPI:
    app = FastAPI(title="sketchrefine")

    def error_response(status, code, message):
        return JSONResponse(status_code=status,
                            content={"error": {"code": code, "message": message}})

    @app.exception_handler(images.ImageError)
    def _bad_image(request: Request, exc):  # noqa: ARG001
        return error_response(400, "bad_image", str(exc))

    @app.exception_handler(inference.InferenceError)
    def _bad_request(request: Request, exc):  # noqa: ARG001
        return error_response(400, "bad_request", str(exc))

    @app.exception_handler(PayloadTooLarge)
    def _too_large(request: Request, exc):  # noqa: ARG001
        return error_response(413, "payload_too_large", str(exc))

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.get("/model-info")
    def model_info():
        return {
            "resolution": bundle.resolution,
            "max_dilation_radius": bundle.max_radius,
            "mode": bundle.mode,
            "step": bundle.step,
            "has_renderer": bundle.renderer is not None,
        }

    @app.get("/debug/radius")
    def debug_radius(level: float = Query(ge=0.0, le=1.0)):
        return {"level": level, "radius": inference.dilation_radius(bundle, level)}

    @app.post("/refine")
    def refine_endpoint(req: RefineRequest):
        _check_payload_size(max_payload_bytes, req.sketch, req.mask, req.photo)
        sketch = _decode_sketch(req.sketch)
        mask = _decode_mask(req.mask) if req.mask else None
        photo = _decode_photo(req.photo) if req.photo else None
        refined = inference.refine(bundle, sketch, req.level, mask=mask, photo=photo)
        return {
            "refined_sketch": images.sketch_to_png_b64(refined),
            "radius": inference.dilation_radius(bundle, req.level),
        }

    @app.post("/edit")
    def edit_endpoint(req: EditRequest):
        _check_payload_size(max_payload_bytes, req.photo, req.mask, req.sketch)
        result = inference.edit(
            bundle,
            _decode_photo(req.photo),
            _decode_mask(req.mask),
            _decode_sketch(req.sketch),
            req.level,
            outputs=tuple(req.outputs),
        )
        return _encode_result(result)

    @app.post("/synth")
    def synth_endpoint(req: SynthRequest):
        _check_payload_size(max_payload_bytes, req.sketch)
        result = inference.synth(bundle, _decode_sketch(req.sketch), req.level,
                                 outputs=tuple(req.outputs))
        return _encode_result(result)

    return app


def _encode_result(result: dict) -> dict:
    encoded = {}
    for key, arr in result.items():
        if key == "refined_sketch":
            encoded[key] = images.sketch_to_png_b64(arr)
        else:
            encoded[key] = images.photo_to_png_b64(arr)
    return encoded


def serve(bind_host, port, refiner_checkpoint, renderer_checkpoint=None):
    import uvicorn

    bundle = inference.load_bundle(refiner_checkpoint, renderer_checkpoint)
    uvicorn.run(create_app(bundle), host=bind_host, port=port, log_level="warning")
