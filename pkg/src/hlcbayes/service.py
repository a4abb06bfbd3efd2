"""HTTP face of the personalization loop for the companion console.

JSON over HTTP, one agent per server. All mutation funnels through the
agent behind a non-blocking lock: a second appraisal arriving while one
is being processed gets a 409 instead of queueing, which keeps the
single-writer story visible at the API boundary.
"""

from __future__ import annotations

import io
import math
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .agent import Appraisal, DesignAgent, NEGATIVE, POSITIVE
from .audio import FrameConfig, process_samples, read_wav, synthesize_demo_clip, write_wav
from .fitting import FitConfig, Segment
from .messages import GammaMessage, GaussianMessage, InverseGammaMessage
from .model import Theta, ThetaPriors, default_priors


@dataclass
class ServerConfig:
    host: str = "127.0.0.1"
    port: int = 8347
    audio_path: str | Path | None = None  # demo clip; synthesized when missing
    db_path: str | Path | None = None
    log_path: str | Path | None = None
    seed: int = 0
    buffer_seconds: float = 3.0
    fit_iterations: int = 200
    priors: ThetaPriors = field(default_factory=default_priors)
    frames: FrameConfig = field(default_factory=FrameConfig)

    def __post_init__(self):
        if not (1 <= self.port <= 65535):
            raise ValueError(f"port must be in [1, 65535], got {self.port}")


def _theta_dict(theta: Theta) -> dict:
    return {
        "alpha": theta.alpha,
        "beta": theta.beta,
        "obs_variance": theta.obs_variance,
        "gain_precision": theta.gain_precision,
    }


def _moments(post) -> dict:
    out = {
        "alpha": {"mean": post.alpha.mean, "variance": post.alpha.variance},
        "beta": {"mean": post.beta.mean, "variance": post.beta.variance},
        "obs_variance": {
            "mean": post.obs_variance.mean() if post.obs_variance.shape > 1 else None,
            "variance": post.obs_variance.variance() if post.obs_variance.shape > 2 else None,
        },
        "gain_precision": {
            "mean": post.gain_precision.mean(),
            "variance": post.gain_precision.variance(),
        },
    }
    return out


def _gaussian_density(msg: GaussianMessage, n: int = 101) -> tuple[list, list]:
    sd = math.sqrt(msg.variance)
    grid = np.linspace(msg.mean - 4 * sd, msg.mean + 4 * sd, n)
    dens = np.exp(-0.5 * ((grid - msg.mean) / sd) ** 2) / (sd * math.sqrt(2 * math.pi))
    return grid.tolist(), dens.tolist()


def _gamma_density_on(grid: np.ndarray, msg: GammaMessage) -> list:
    a, b = msg.shape, msg.rate
    logs = a * math.log(b) + (a - 1) * np.log(grid) - b * grid - math.lgamma(a)
    return np.exp(logs).tolist()


def _ig_density_on(grid: np.ndarray, msg: InverseGammaMessage) -> list:
    a, b = msg.shape, msg.scale
    logs = a * math.log(b) - (a + 1) * np.log(grid) - b / grid - math.lgamma(a)
    return np.exp(logs).tolist()


def _positive_grid(mean: float, sd: float, n: int = 101) -> np.ndarray:
    lo = max(mean - 4 * sd, 1e-6)
    hi = mean + 4 * sd
    return np.linspace(lo, hi, n)


class LoopService:
    """Owns the agent, the demo audio, and the per-trial audio cache."""

    def __init__(self, config: ServerConfig):
        self.config = config
        audio_path = Path(config.audio_path) if config.audio_path else None
        if audio_path is None or not audio_path.exists():
            audio_path = audio_path or Path("hlcbayes_demo.wav")
            synthesize_demo_clip(audio_path, config.frames)
        self.audio_path = audio_path
        samples, rate, fmt = read_wav(audio_path)
        self.samples = samples
        self.fmt = fmt
        self.frames = FrameConfig(
            rate, config.frames.frame_length, config.frames.hop, config.frames.calibration_offset
        )
        self.agent = DesignAgent(
            priors=config.priors,
            seed=config.seed,
            db_path=config.db_path,
            log_path=config.log_path,
            fit_config=FitConfig(iterations=config.fit_iterations, early_stop=1e-9),
        )
        self._lock = threading.Lock()
        self._wav_cache: dict[int, bytes] = {}
        self._track_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self._render_current()

    # -- audio ---------------------------------------------------------

    def _render_current(self) -> None:
        trial = self.agent.trial
        if trial.trial_id in self._wav_cache:
            return
        result = process_samples(self.samples, trial.theta, self.frames)
        buf = io.BytesIO()
        write_wav(buf, result.samples, self.frames.sample_rate, "float32")
        self._wav_cache[trial.trial_id] = buf.getvalue()
        self._track_cache[trial.trial_id] = (result.levels, result.gain_means)

    def current_wav(self) -> bytes:
        self._render_current()
        return self._wav_cache[self.agent.trial.trial_id]

    def original_wav(self) -> bytes:
        return Path(self.audio_path).read_bytes()

    def _recent_buffer(self) -> Segment | None:
        trial_id = self.agent.trial.trial_id
        if trial_id not in self._track_cache:
            self._render_current()
        levels, gains = self._track_cache[trial_id]
        frames = max(2, int(self.config.buffer_seconds / self.frames.hop_seconds))
        if len(levels) < 2:
            return None
        return Segment(levels[-frames:], gains[-frames:], {"trial_id": trial_id})

    # -- state ---------------------------------------------------------

    def state_dict(self) -> dict:
        trial = self.agent.trial
        return {
            "trial_id": trial.trial_id,
            "source": trial.source,
            "started_at": trial.started_at,
            "theta": _theta_dict(trial.theta),
            "posteriors": _moments(self.agent.posteriors),
            "db_size": len(self.agent.db),
            "warning": self.agent.last_warning,
        }

    def history_dict(self) -> dict:
        return {
            "trials": [
                {
                    "trial_id": t.trial_id,
                    "source": t.source,
                    "started_at": t.started_at,
                    "theta": _theta_dict(t.theta),
                }
                for t in self.agent.trials
            ],
            "appraisals": [
                {"polarity": a.polarity, "t": a.received_at} for a in self.agent.appraisals
            ],
            "db_size": len(self.agent.db),
        }

    def posterior_dict(self) -> dict:
        post = self.agent.posteriors
        prior = self.agent.priors
        out: dict = {"parameters": {}}
        for name in ("alpha", "beta"):
            msg: GaussianMessage = getattr(post, name)
            pmsg: GaussianMessage = getattr(prior, name)
            grid, dens = _gaussian_density(msg)
            garr = np.asarray(grid)
            psd = math.sqrt(pmsg.variance)
            prior_dens = (
                np.exp(-0.5 * ((garr - pmsg.mean) / psd) ** 2) / (psd * math.sqrt(2 * math.pi))
            ).tolist()
            out["parameters"][name] = {
                "mean": msg.mean,
                "variance": msg.variance,
                "grid": grid,
                "density": dens,
                "prior_density": prior_dens,
            }
        ig = post.obs_variance
        mean_ig = ig.mean() if ig.shape > 1 else prior.obs_variance.mean()
        sd_ig = math.sqrt(ig.variance()) if ig.shape > 2 else mean_ig
        grid = _positive_grid(mean_ig, sd_ig)
        out["parameters"]["obs_variance"] = {
            "mean": ig.mean() if ig.shape > 1 else None,
            "variance": ig.variance() if ig.shape > 2 else None,
            "grid": grid.tolist(),
            "density": _ig_density_on(grid, ig),
            "prior_density": _ig_density_on(grid, prior.obs_variance),
        }
        gm = post.gain_precision
        grid = _positive_grid(gm.mean(), math.sqrt(gm.variance()))
        out["parameters"]["gain_precision"] = {
            "mean": gm.mean(),
            "variance": gm.variance(),
            "grid": grid.tolist(),
            "density": _gamma_density_on(grid, gm),
            "prior_density": _gamma_density_on(grid, prior.gain_precision),
        }
        return out

    # -- mutation ------------------------------------------------------

    def handle_appraisal(self, polarity: str) -> tuple[int, dict]:
        if polarity not in (POSITIVE, NEGATIVE):
            return 400, {"error": f"polarity must be '{POSITIVE}' or '{NEGATIVE}'"}
        if not self._lock.acquire(blocking=False):
            return 409, {"error": "an appraisal is already being processed"}
        try:
            buffer = self._recent_buffer() if polarity == POSITIVE else None
            self.agent.on_appraisal(Appraisal(polarity), buffer)
            self._render_current()
            return 200, self.state_dict()
        finally:
            self._lock.release()


def create_app(config: ServerConfig | None = None) -> FastAPI:
    service = LoopService(config or ServerConfig())
    app = FastAPI(title="hlcbayes personalization loop")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.service = service

    @app.get("/api/state")
    def state():
        return service.state_dict()

    @app.post("/api/appraisal")
    async def appraisal(request: Request):
        try:
            body = await request.json()
        except Exception:
            return JSONResponse({"error": "body must be JSON"}, status_code=400)
        polarity = body.get("polarity") if isinstance(body, dict) else None
        status, payload = service.handle_appraisal(polarity)
        return JSONResponse(payload, status_code=status)

    @app.get("/api/audio/current")
    def audio_current():
        return Response(service.current_wav(), media_type="audio/wav")

    @app.get("/api/audio/original")
    def audio_original():
        return Response(service.original_wav(), media_type="audio/wav")

    @app.get("/api/history")
    def history():
        return service.history_dict()

    @app.get("/api/posterior")
    def posterior():
        return service.posterior_dict()

    return app


def serve(config: ServerConfig) -> None:
    """Run the loop service until interrupted."""
    import uvicorn

    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
