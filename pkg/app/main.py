"""
FastAPI application factory - creates and configures the app.
"""

from dotenv import load_dotenv
from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from app import __version__
from app.api.routes import router as api_router


def create_app() -> FastAPI:
    """Create and configure the FastAPI application."""
    load_dotenv()
    app = FastAPI(
        title="LPO Reward API",
        version=__version__,
        description="Window-entropy and distance rewards for GUI actions",
    )

    app.add_middleware(
        CORSMiddleware,
        allow_origins=["http://localhost:8000"],
        allow_credentials=True,
        allow_methods=["*"],
        allow_headers=["*"],
    )

    # Health check endpoint
    @app.get("/health")
    async def health_check():
        return {"status": "healthy", "service": "lpo"}

    app.include_router(api_router)

    return app


# Useful for uvicorn entrypoint. ["app.main:app"]
app = create_app()
