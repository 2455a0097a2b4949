"""Local HTTP + JSON API: sessions, acquisition jobs, fits, import/export.

Single-user lab/teaching service: binds 127.0.0.1, no auth, flat-file
persistence under the workspace directory (sessions/{id}/...).  Long
acquisitions run as jobs on worker threads; progress streams out as
JSON-lines events with polling on /jobs/{id} as the fallback.  Event
fan-out uses bounded per-subscriber queues that drop the oldest snapshot
when a consumer lags; terminal events are never dropped because nothing
is enqueued after them.
"""

from __future__ import annotations

import json
import os
import queue
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path


from fastapi import FastAPI, File, Request, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.responses import FileResponse, HTMLResponse, JSONResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .analysis import fit_g2
from .correlator import (
    CorrelatorError,
    HistogramSpec,
    correlate,
    histogram_to_csv,
    histogram_to_json,
    normalize,
)
from .detection import TagStream, TagStreamError, read_tags
from .emitters import SampleSpec, generate_sample, sample_to_json
from .profiles import load_profile
from .scanning import (
    ScanConfig,
    SessionBusyError,
    make_session,
    run_hbt_reserved,
    run_scan_reserved,
    save_scan,
)
from .scenarios import DEMO_FAST_BRIGHTNESS, brighten_sample

SCHEMA = "photonbench/1"
EVENT_QUEUE_SIZE = 16


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, field_name: str | None = None):
        self.status = status
        self.code = code
        self.message = message
        self.field_name = field_name


class CreateSessionRequest(BaseModel):
    profile: str = "reference"
    seed: int = 0
    demo_fast: bool = True
    sample: dict | None = None      # SampleSpec fields; omit for the default field


class ScanRequest(BaseModel):
    extent_um: tuple[float, float] = (20.0, 20.0)
    resolution: tuple[int, int] = (100, 100)
    integration_time_ms: float = 40.0
    laser_power_mw: float | None = None
    z_offset_um: float = 0.0
    rng_seed: int | None = None


class HbtRequest(BaseModel):
    x_um: float
    y_um: float
    duration_s: float = 60.0
    bin_width_ps: int = 200
    bin_count: int = 1000
    seed: int | None = None


@dataclass
class Job:
    id: str
    kind: str                      # scan | hbt
    session_id: str
    status: str = "running"        # running | done | cancelled | error
    progress: float = 0.0
    error: str | None = None
    result: dict | None = None
    partial: dict = field(default_factory=dict)
    cancel_event: threading.Event = field(default_factory=threading.Event)
    subscribers: list[queue.Queue] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)
    started_at: float = field(default_factory=time.time)

    def publish(self, event: dict) -> None:
        with self.lock:
            for q in self.subscribers:
                while True:
                    try:
                        q.put_nowait(event)
                        break
                    except queue.Full:
                        try:
                            q.get_nowait()   # drop-oldest for lagging consumers
                        except queue.Empty:
                            pass

    def subscribe(self) -> queue.Queue:
        q = queue.Queue(maxsize=EVENT_QUEUE_SIZE)
        with self.lock:
            self.subscribers.append(q)
        return q

    def summary(self) -> dict:
        return {
            "schema": SCHEMA,
            "id": self.id,
            "kind": self.kind,
            "session": self.session_id,
            "status": self.status,
            "progress": self.progress,
            "error": self.error,
            "result": self.result,
            "partial": self.partial,
        }


@dataclass
class SessionEntry:
    session: object
    profile_name: str
    sample_seed: int
    created_at: str
    directory: Path

    def descriptor(self) -> dict:
        s = self.session
        return {
            "schema": SCHEMA,
            "id": s.id,
            "profile": self.profile_name,
            "sample_seed": self.sample_seed,
            "activity": s.activity,
            "progress": s.progress,
            "created_at": self.created_at,
            "n_emitters": len(s.sample.emitters),
            "field_size_um": list(s.sample.spec.field_size_um),
        }


def _workspace_dir(workspace: Path | None) -> Path:
    if workspace is None:
        workspace = Path(os.environ.get("PHOTONBENCH_WORKSPACE", "photonbench-data"))
    workspace.mkdir(parents=True, exist_ok=True)
    return workspace


def create_app(workspace: Path | None = None, frontend_dir: Path | None = None) -> FastAPI:
    app = FastAPI(title="photonbench", version="1")
    ws = _workspace_dir(workspace)
    sessions: dict[str, SessionEntry] = {}
    jobs: dict[str, Job] = {}

    @app.exception_handler(ApiError)
    async def api_error_handler(_req: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content={
            "code": exc.code, "message": exc.message, "field": exc.field_name,
        })

    @app.exception_handler(RequestValidationError)
    async def validation_handler(_req: Request, exc: RequestValidationError):
        first = exc.errors()[0] if exc.errors() else {}
        loc = ".".join(str(p) for p in first.get("loc", []) if p != "body")
        return JSONResponse(status_code=422, content={
            "code": "validation_error",
            "message": first.get("msg", "invalid request"),
            "field": loc or None,
        })

    def get_session(session_id: str) -> SessionEntry:
        entry = sessions.get(session_id)
        if entry is None:
            raise ApiError(404, "session_not_found", f"no session {session_id}")
        return entry

    def get_job(job_id: str) -> Job:
        job = jobs.get(job_id)
        if job is None:
            raise ApiError(404, "job_not_found", f"no job {job_id}")
        return job

    # ------------------------------------------------------------------ sessions

    @app.post("/sessions", status_code=201)
    def create_session(req: CreateSessionRequest):
        try:
            profile = load_profile(req.profile)
        except FileNotFoundError as e:
            raise ApiError(422, "unknown_profile", str(e), "profile")
        sample_kw = dict(req.sample or {})
        if "field_size_um" in sample_kw:
            sample_kw["field_size_um"] = tuple(sample_kw["field_size_um"])
        sample_kw.setdefault("rng_seed", req.seed)
        try:
            sample = generate_sample(SampleSpec(**sample_kw))
        except (TypeError, ValueError) as e:
            raise ApiError(422, "invalid_sample_spec", str(e), "sample")
        if req.demo_fast:
            sample = brighten_sample(sample, DEMO_FAST_BRIGHTNESS)
        session = make_session(profile, sample, seed=req.seed)
        directory = ws / "sessions" / session.id
        directory.mkdir(parents=True, exist_ok=True)
        (directory / "sample.json").write_text(sample_to_json(session.sample))
        entry = SessionEntry(
            session=session, profile_name=profile.name, sample_seed=req.seed,
            created_at=time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            directory=directory,
        )
        sessions[session.id] = entry
        return entry.descriptor()

    @app.get("/sessions")
    def list_sessions():
        return {"schema": SCHEMA, "sessions": [e.descriptor() for e in sessions.values()]}

    @app.get("/sessions/{session_id}")
    def session_info(session_id: str):
        return get_session(session_id).descriptor()

    # ------------------------------------------------------------------ jobs

    def start_job(kind: str, entry: SessionEntry, worker) -> Job:
        session = entry.session
        try:
            session.begin(kind)
        except SessionBusyError as e:
            raise ApiError(409, "session_busy", str(e))
        job = Job(id=uuid.uuid4().hex[:12], kind=kind, session_id=session.id)
        jobs[job.id] = job

        def run():
            try:
                worker(job)
                if job.cancel_event.is_set():
                    job.status = "cancelled"
                else:
                    job.status = "done"
                job.publish({"event": job.status, "job": job.summary()})
            except Exception as e:  # noqa: BLE001 - job boundary
                job.status = "error"
                job.error = f"{type(e).__name__}: {e}"
                job.publish({"event": "error", "job": job.summary()})
            finally:
                session.end()

        threading.Thread(target=run, name=f"job-{job.id}", daemon=True).start()
        return job

    @app.post("/sessions/{session_id}/scan", status_code=202)
    def start_scan(session_id: str, req: ScanRequest):
        entry = get_session(session_id)
        try:
            config = ScanConfig(
                extent_um=tuple(req.extent_um),
                resolution=tuple(req.resolution),
                integration_time_ms=req.integration_time_ms,
                laser_power_mw=req.laser_power_mw,
                z_offset_um=req.z_offset_um,
                rng_seed=req.rng_seed if req.rng_seed is not None else entry.session.seed,
                profile_name=entry.profile_name,
            )
        except ValueError as e:
            raise ApiError(422, "invalid_scan_config", str(e))

        def worker(job: Job):
            nx, ny = config.resolution
            job.partial = {"rows_done": 0, "total_rows": ny, "counts": []}

            def progress(row, row_counts, rows_done, total_rows):
                job.progress = rows_done / total_rows
                job.partial["rows_done"] = rows_done
                job.partial["counts"].append([int(v) for v in row_counts])
                job.publish({
                    "event": "row", "row": int(row),
                    "counts": [int(v) for v in row_counts],
                    "rows_done": rows_done, "total_rows": total_rows,
                })

            img = run_scan_reserved(entry.session, config, progress=progress,
                                    cancel=job.cancel_event)
            csv_path, json_path = save_scan(img, entry.directory / "scan")
            job.result = {
                "complete": img.complete,
                "counts": img.counts.tolist(),
                "resolution": list(config.resolution),
                "extent_um": list(config.extent_um),
                "pixel_pitch_um": list(img.pixel_pitch_um),
                "profile": entry.profile_name,
                "sim_duration_s": img.sim_duration_s,
                "exports": ["scan.csv", "scan.json"],
            }

        job = start_job("scanning", entry, worker)
        return {"schema": SCHEMA, "job_id": job.id}

    @app.post("/sessions/{session_id}/hbt", status_code=202)
    def start_hbt(session_id: str, req: HbtRequest):
        entry = get_session(session_id)
        try:
            spec = HistogramSpec(bin_width_ps=req.bin_width_ps, bin_count=req.bin_count)
        except CorrelatorError as e:
            raise ApiError(422, "invalid_histogram_spec", str(e))

        def worker(job: Job):
            def progress(done_s, total_s, snapshot):
                job.progress = done_s / total_s
                job.partial = {
                    "done_s": done_s, "duration_s": total_s,
                    "counts": snapshot.counts.tolist(),
                    "n_a": snapshot.n_a, "n_b": snapshot.n_b,
                    "duration_ps": snapshot.duration_ps,
                }
                job.publish({
                    "event": "histogram", "done_s": done_s, "duration_s": total_s,
                    "counts": snapshot.counts.tolist(),
                    "n_a": snapshot.n_a, "n_b": snapshot.n_b,
                })

            hist = run_hbt_reserved(entry.session, (req.x_um, req.y_um), req.duration_s,
                                    spec=spec, seed=req.seed, progress=progress,
                                    cancel=job.cancel_event)
            (entry.directory / "hbt.json").write_text(histogram_to_json(hist))
            (entry.directory / "hbt.csv").write_text(histogram_to_csv(hist))
            result = {
                "complete": hist.complete,
                "n_a": hist.n_a, "n_b": hist.n_b,
                "duration_ps": hist.duration_ps,
                "counts": hist.counts.tolist(),
                "g2": hist.normalized.tolist() if hist.normalized is not None else None,
                "bin_width_ps": spec.bin_width_ps,
                "bin_count": spec.bin_count,
                "exports": ["hbt.json", "hbt.csv"],
                "fit": None,
            }
            if hist.normalized is not None:
                fit = fit_g2(hist)
                result["fit"] = fit.to_dict()
                (entry.directory / "fit.json").write_text(
                    json.dumps({"schema": SCHEMA, "fit": result["fit"]},
                               indent=2, sort_keys=True) + "\n")
                result["exports"].append("fit.json")
            job.result = result

        job = start_job("hbt", entry, worker)
        return {"schema": SCHEMA, "job_id": job.id}

    @app.get("/jobs/{job_id}")
    def job_info(job_id: str):
        return get_job(job_id).summary()

    @app.post("/jobs/{job_id}/cancel")
    def cancel_job(job_id: str):
        job = get_job(job_id)
        job.cancel_event.set()
        return {"schema": SCHEMA, "id": job.id, "status": job.status}

    @app.get("/jobs/{job_id}/events")
    def job_events(job_id: str):
        job = get_job(job_id)
        q = job.subscribe()

        def stream():
            # late subscribers to a finished job still get the terminal event
            if job.status != "running":
                yield json.dumps({"event": job.status, "job": job.summary()}) + "\n"
                return
            while True:
                try:
                    event = q.get(timeout=30.0)
                except queue.Empty:
                    yield json.dumps({"event": "keepalive"}) + "\n"
                    continue
                yield json.dumps(event) + "\n"
                if event.get("event") in ("done", "cancelled", "error"):
                    return

        return StreamingResponse(stream(), media_type="application/x-ndjson")

    # ------------------------------------------------------------------ export

    EXPORTABLE = {
        "sample.json": "application/json",
        "scan.csv": "text/csv",
        "scan.json": "application/json",
        "hbt.json": "application/json",
        "hbt.csv": "text/csv",
        "fit.json": "application/json",
    }

    @app.get("/sessions/{session_id}/export/{artifact}")
    def export_artifact(session_id: str, artifact: str):
        entry = get_session(session_id)
        if artifact not in EXPORTABLE:
            raise ApiError(404, "unknown_artifact",
                           f"artifact must be one of {sorted(EXPORTABLE)}", "artifact")
        path = entry.directory / artifact
        if not path.exists():
            raise ApiError(404, "artifact_not_ready",
                           f"{artifact} has not been produced yet", "artifact")
        return FileResponse(path, media_type=EXPORTABLE[artifact], filename=artifact)

    # ------------------------------------------------------------------ correlate upload

    @app.post("/correlate")
    async def correlate_upload(a: UploadFile = File(...), b: UploadFile = File(...),
                               bin_width_ps: int = 200, bins: int = 1000):
        import tempfile

        try:
            spec = HistogramSpec(bin_width_ps=bin_width_ps, bin_count=bins)
        except CorrelatorError as e:
            raise ApiError(422, "invalid_histogram_spec", str(e))
        streams = []
        for upload, name in ((a, "a"), (b, "b")):
            with tempfile.NamedTemporaryFile(suffix=".pbtg", delete=False) as tmp:
                tmp.write(await upload.read())
                tmp_path = tmp.name
            try:
                streams.append(read_tags(tmp_path))
            except TagStreamError as e:
                raise ApiError(422, "invalid_tag_file", str(e), name)
            finally:
                os.unlink(tmp_path)
        sa, sb = streams
        duration = max(sa.duration_ps, sb.duration_ps)
        sa = TagStream(channel=sa.channel, timestamps=sa.timestamps, duration_ps=duration)
        sb = TagStream(channel=sb.channel, timestamps=sb.timestamps, duration_ps=duration)
        hist = correlate(sa, sb, spec)
        if hist.n_a and hist.n_b and hist.duration_ps:
            hist = normalize(hist)
        return json.loads(histogram_to_json(hist))

    # ------------------------------------------------------------------ frontend

    static_dir = frontend_dir
    if static_dir is None:
        env_dir = os.environ.get("PHOTONBENCH_FRONTEND")
        if env_dir:
            static_dir = Path(env_dir)
        else:
            candidate = Path(__file__).resolve().parents[2] / "frontend" / "dist"
            static_dir = candidate if candidate.exists() else None

    if static_dir is not None and static_dir.exists():
        app.mount("/app", StaticFiles(directory=static_dir, html=True), name="console")

        @app.get("/", response_class=HTMLResponse, include_in_schema=False)
        def index_redirect():
            return HTMLResponse('<meta http-equiv="refresh" content="0; url=/app/">')
    else:
        @app.get("/", response_class=HTMLResponse, include_in_schema=False)
        def index_placeholder():
            return HTMLResponse(
                "<h1>photonbench</h1><p>API is running. Build the operator console "
                "(frontend/) to serve the UI here; see README.</p>")

    return app
