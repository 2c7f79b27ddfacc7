from .models import Base, Run, StageOutput
from .session import create_db_session, get_session

__all__ = ['Base', 'Run', 'StageOutput', 'create_db_session', 'get_session']
