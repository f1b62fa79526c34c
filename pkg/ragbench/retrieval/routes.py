"""
Retrieval Service API Routes
HTTP JSON surface of the retrieval service: /search, /health, /stats, /info.
"""

from contextlib import asynccontextmanager

from fastapi import APIRouter, Depends, FastAPI, HTTPException, Request
from loguru import logger

from .models import HealthResponse, RetrieverInfo, SearchRequest, SearchResponse, ServiceStats
from .service import RetrievalService, RetrievalServiceError

retrieval_router = APIRouter(tags=["Retrieval"])


# =============================================================================
# Dependencies
# =============================================================================

def get_service(request: Request) -> RetrievalService:
    """Service instance attached by create_app"""
    service = getattr(request.app.state, "retrieval_service", None)
    if service is None:
        raise HTTPException(status_code=503, detail="Retrieval service not initialized")
    return service


# =============================================================================
# Endpoints
# =============================================================================

# plain `def` endpoints run in the threadpool; search is CPU-bound
@retrieval_router.post("/search", response_model=SearchResponse)
def search(body: SearchRequest, service: RetrievalService = Depends(get_service)) -> SearchResponse:
    try:
        passages, hit = service.cached_search(body.query, body.k)
    except RetrievalServiceError as e:
        logger.error(f"Search failed: {e}")
        raise HTTPException(status_code=500, detail=str(e))
    return SearchResponse(passages=passages, cache_hit=hit)


@retrieval_router.get("/health", response_model=HealthResponse)
def health(service: RetrievalService = Depends(get_service)) -> HealthResponse:
    return HealthResponse(status="ok", corpus_fingerprint=service.corpus_fingerprint)


@retrieval_router.get("/stats", response_model=ServiceStats)
def stats(service: RetrievalService = Depends(get_service)) -> ServiceStats:
    return service.stats()


@retrieval_router.get("/info", response_model=RetrieverInfo)
def info(service: RetrievalService = Depends(get_service)) -> RetrieverInfo:
    return service.info()


# =============================================================================
# App Factory
# =============================================================================

def create_app(service: RetrievalService) -> FastAPI:
    """
    Build the FastAPI app around a service.

    The cache is persisted when the app shuts down (SIGTERM/SIGINT under uvicorn).
    """

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        logger.info("Retrieval service started")
        yield
        logger.info("Retrieval service shutting down; persisting cache")
        service.close()

    app = FastAPI(title="ragbench retrieval service", version="1.0.0", lifespan=lifespan)
    app.state.retrieval_service = service
    app.include_router(retrieval_router)
    return app
