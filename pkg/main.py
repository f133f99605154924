from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.middleware.gzip import GZipMiddleware
import traceback

import config as settings
from data_loader import synth_linear
from diagnostics import summarize
from errors import DivergenceError, NumericOverflowError
from models import (Dataset, Nonlinearity, OracleRequest, OracleResponse, RunSpec,
                    SynthDatasetRequest, TrainConfig, TrainRequest, TrainResponse, Variant)
from presets import preset_config
from rrr_oracle import accumulate_stats, solve_rrr
from training_harness import TrainingHarness

app = FastAPI(title="BMVR", description="Biologically plausible multivariate regression")

# Configure CORS
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# Metric rows get large for long runs
app.add_middleware(GZipMiddleware, minimum_size=1000)

harness = TrainingHarness()


def _dataset(request: SynthDatasetRequest) -> Dataset:
    return synth_linear(request.m, request.n, request.k_true, request.T,
                        request.noise_sigma, request.seed)


def _train_config(request: TrainRequest) -> TrainConfig:
    if request.config is not None:
        config = request.config
        if request.variant is not None:
            config = TrainConfig(**{**config.model_dump(), "variant": request.variant})
    else:
        config = preset_config(request.preset or "default-synth", request.variant or Variant.BMVR)
    if request.steps is not None:
        config = config.model_copy(update={"steps": request.steps})
    return config


def _run(request: TrainRequest):
    data = _dataset(request.dataset)
    config = _train_config(request)
    spec = RunSpec(config=config, train=data, eval=data, eval_every=request.eval_every,
                   repeats=request.repeats, label=config.variant.value)
    print(f"[DEBUG] {config.variant.value}: k={config.k} steps={config.steps} repeats={request.repeats} on {data.name}")
    result = harness.run_detailed(spec)
    return data, config, result


def _failure(e: Exception, what: str):
    if isinstance(e, (DivergenceError, NumericOverflowError)):
        print(f"[ERROR] {what}: {e}")
        return HTTPException(status_code=422, detail=str(e))
    if isinstance(e, ValueError):
        return HTTPException(status_code=400, detail=str(e))
    print(f"[ERROR] {what} failed: {str(e)}")
    print(f"[ERROR] Traceback: {traceback.format_exc()}")
    return HTTPException(status_code=500, detail=f"Error during {what}: {str(e)}")


@app.get('/')
def start():
    return {"status": "server running", "message": "API is ready"}


@app.get('/health')
def health_check():
    return {"status": "healthy"}


@app.post('/oracle', response_model=OracleResponse)
def oracle(request: OracleRequest):
    """
    Closed-form rank-k optimum for a synthetic dataset.

    Returns the optimal loss, the eigenvalues of S Cxy Cyx S (descending)
    and whether Cxy has rank >= k.
    """
    try:
        stats = accumulate_stats(_dataset(request.dataset))
        solution = solve_rrr(stats, request.k, request.ridge)
        return OracleResponse(
            optimal_loss=solution.optimal_loss,
            M_eigenvalues=solution.M_eigenvalues.tolist(),
            rank_ok=solution.rank_ok,
            trace_cyy=float(stats.Cyy.trace()),
        )
    except HTTPException:
        raise
    except Exception as e:
        raise _failure(e, "oracle")


@app.post('/train', response_model=TrainResponse)
def train(request: TrainRequest):
    """
    Train on a synthetic dataset and return the aggregated metric rows,
    the oracle optimum and (linear networks) per-repeat diagnostics.
    """
    try:
        data, config, result = _run(request)
        oracle_loss = solve_rrr(accumulate_stats(data), config.k).optimal_loss
        diagnostics = []
        if config.nonlinearity == Nonlinearity.LINEAR:
            diagnostics = [summarize(state, data) for state in result.final_states]
        print(f"[DEBUG] final objective {result.log.rows[-1].objective_mean:.6g}, oracle {oracle_loss:.6g}")
        return TrainResponse(rows=result.log.rows, oracle_loss=oracle_loss, diagnostics=diagnostics)
    except HTTPException:
        raise
    except Exception as e:
        raise _failure(e, "training")


@app.post('/diagnose')
def diagnose(request: TrainRequest):
    """
    Train the requested model, then report constraint saturation, upper
    bound tightness and the teaching-signal comparison for each repeat.
    """
    try:
        data, config, result = _run(request)
        if config.nonlinearity != Nonlinearity.LINEAR:
            raise HTTPException(status_code=400, detail="diagnostics need the linear network")
        summaries = [summarize(state, data) for state in result.final_states]
        return {
            "status": "success",
            "variant": config.variant.value,
            "steps": config.steps,
            "diagnostics": [summary.model_dump() for summary in summaries],
        }
    except HTTPException:
        raise
    except Exception as e:
        raise _failure(e, "diagnostics")


if __name__ == "__main__":
    import uvicorn
    uvicorn.run(app, host="0.0.0.0", port=settings.server_port())
