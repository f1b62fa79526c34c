"""
Retrieval Server Runner
Binds the retrieval app with uvicorn and returns a handle that can run in the
foreground (CLI) or in a background thread (tests, notebooks).
"""

import socket
import threading
import time
from pathlib import Path
from typing import Optional, Tuple, Union

import uvicorn
from loguru import logger

from ragbench.errors import RagBenchError

from .index import InvertedIndex
from .routes import create_app
from .service import RetrievalService


class ServiceStartupError(RagBenchError):
    """Address cannot be bound or the index cannot be loaded"""
    pass


def parse_address(addr: str) -> Tuple[str, int]:
    """Split HOST:PORT"""
    host, sep, port = addr.rpartition(":")
    if not sep or not port.isdigit():
        raise ServiceStartupError(f"address must be HOST:PORT, got {addr!r}")
    return host or "127.0.0.1", int(port)


def _check_bindable(host: str, port: int) -> None:
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as sock:
        try:
            sock.bind((host, port))
        except OSError as e:
            raise ServiceStartupError(f"cannot bind {host}:{port}: {e}") from e


class RetrieverServer:
    """
    Running-service handle.

    Usage:
        server = serve(index, "127.0.0.1:8765", Path("cache.jsonl"))
        server.start()           # background thread
        ...
        server.stop()            # persists the cache
    """

    def __init__(self, service: RetrievalService, host: str, port: int, log_level: str = "info"):
        self.service = service
        self.host = host
        self.port = port
        self.app = create_app(service)
        self._server = uvicorn.Server(
            uvicorn.Config(self.app, host=host, port=port, log_level=log_level, lifespan="on")
        )
        self._thread: Optional[threading.Thread] = None

    @property
    def url(self) -> str:
        return f"http://{self.host}:{self.port}"

    def run(self) -> None:
        """Serve in the foreground until SIGINT/SIGTERM"""
        logger.info(f"Serving retriever on {self.url}")
        self._server.run()

    def start(self, timeout: float = 10.0) -> "RetrieverServer":
        self._thread = threading.Thread(target=self._server.run, name="ragbench-retriever", daemon=True)
        self._thread.start()
        deadline = time.monotonic() + timeout
        while not self._server.started:
            if not self._thread.is_alive():
                raise ServiceStartupError(f"server on {self.url} exited during start-up")
            if time.monotonic() > deadline:
                raise ServiceStartupError(f"server on {self.url} did not start within {timeout}s")
            time.sleep(0.02)
        logger.info(f"Retriever running on {self.url}")
        return self

    def stop(self, timeout: float = 10.0) -> None:
        self._server.should_exit = True
        if self._thread is not None:
            self._thread.join(timeout)
            self._thread = None


def serve(
    index: Union[InvertedIndex, str, Path],
    addr: str,
    cache_path: Optional[Union[str, Path]] = None,
    max_entries: Optional[int] = None,
    log_level: str = "info",
) -> RetrieverServer:
    """
    Prepare the retrieval service on an address.

    Args:
        index: Loaded index or path to a serialized one
        addr: HOST:PORT to bind
        cache_path: Cache journal; loaded if present, persisted on shutdown
        max_entries: Optional LRU bound for the cache

    Raises:
        ServiceStartupError: Port in use or malformed address
    """
    host, port = parse_address(addr)
    _check_bindable(host, port)
    if not isinstance(index, InvertedIndex):
        index = InvertedIndex.load(index)
    service = RetrievalService(index, cache_path=cache_path, max_entries=max_entries)
    return RetrieverServer(service, host, port, log_level=log_level)
