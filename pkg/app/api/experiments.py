# app/api/experiments.py
from __future__ import annotations

from dataclasses import asdict
from typing import Any, Dict, Optional

from fastapi import APIRouter, Body, Depends, Header, HTTPException

from app.core.config import settings
from app.core.errors import ColmeError, ConfigError
from app.services.experiment_service import curves_experiment, parse_experiment, simulate_experiment

router = APIRouter()


async def require_key(x_api_key: Optional[str] = Header(None)) -> None:
    if x_api_key != settings.api_key:
        raise HTTPException(status_code=401, detail="Unauthorized")


def _load(payload: Dict[str, Any]):
    try:
        return parse_experiment(payload)
    except ConfigError as e:
        raise HTTPException(status_code=422, detail=str(e))


@router.get("/health")
def health() -> Dict[str, str]:
    return {"status": "ok"}


@router.post("/curves", dependencies=[Depends(require_key)])
def curves(payload: Dict[str, Any] = Body(...)) -> Dict[str, Any]:
    exp = _load(payload)
    try:
        rows, notes = curves_experiment(exp)
    except ColmeError as e:
        raise HTTPException(status_code=400, detail=str(e))
    return {"rows": [asdict(r) for r in rows], "notes": notes}


@router.post("/simulate", dependencies=[Depends(require_key)])
def simulate(payload: Dict[str, Any] = Body(...)) -> Dict[str, Any]:
    exp = _load(payload)
    cfg = exp.simulation
    seeds = exp.seed_values()
    work = cfg.agents * cfg.t_max * len(seeds)
    if work > settings.api_max_work:
        raise HTTPException(
            status_code=400,
            detail=f"run too large for the HTTP surface ({work} > {settings.api_max_work}); use the CLI",
        )
    try:
        summary, rows, notes = simulate_experiment(exp, seeds=seeds, workers=1)
    except ColmeError as e:
        raise HTTPException(status_code=400, detail=str(e))
    return {"summary": summary, "rows": [asdict(r) for r in rows], "notes": notes}
