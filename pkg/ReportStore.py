import os
import json
import sqlite3
import logging
import hashlib
from functools import wraps
from typing import Optional

# Configuração do logger
logging.basicConfig(filename='ReportStore.log', level=logging.INFO,
                    format='%(asctime)s - %(levelname)s - %(message)s')


def config_hash(config: dict) -> str:
    """sha256 of the canonical JSON form of a run configuration."""
    canonical = json.dumps(config, sort_keys=True, default=str)
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def memoize_to_db(table_name: str = "reports"):
    """
    Decorador para memoizar relatórios de um comando no banco de dados.

    The decorated method receives the run configuration (a dict) as first
    argument and returns a JSON-serializable payload; only stable payloads are
    stored. The owner must carry a `store` attribute; a store of None disables
    the cache. Database errors are logged and the computation runs uncached;
    computation errors propagate.
    """
    def decorator(func):
        @wraps(func)
        def wrapped(self, config: dict, *args, **kwargs):
            store = getattr(self, "store", None)
            if store is None:
                return func(self, config, *args, **kwargs)
            if not hasattr(store, "connect"):
                raise AttributeError("O atributo 'store' deve possuir um método 'connect'.")

            key = config_hash(config)
            try:
                cached = store.fetch(key, table_name)
            except sqlite3.Error as db_error:
                logging.error(f"Erro de banco de dados ao consultar o cache: {db_error}")
                cached = None
            if cached is not None:
                logging.info(f"Relatório encontrado no banco para hash: {key}")
                return cached

            result = func(self, config, *args, **kwargs)
            if result and result.get("stable", True):
                try:
                    store.save(key, config.get("command", ""), config, result, table_name)
                    logging.info(f"Relatório memoizado no banco com hash: {key}")
                except sqlite3.Error as db_error:
                    logging.error(f"Erro de banco de dados ao memoizar o relatório: {db_error}")
            return result
        return wrapped
    return decorator


class ReportStore:
    """
    SQLite cache of finished reports, keyed by the hash of their configuration.

    Parameters:
    db_name (str): File name of the database inside base_dir.
    base_dir (str): Directory of the database; defaults to QSU2_CACHE_DIR or ./databases.
    """

    def __init__(self, db_name: str = "reports.db", base_dir: Optional[str] = None):
        self.base_dir = base_dir or os.environ.get("QSU2_CACHE_DIR") or os.path.join(os.getcwd(), "databases")
        os.makedirs(self.base_dir, exist_ok=True)

        self.db_path = os.path.join(self.base_dir, os.path.basename(db_name))
        if not os.path.exists(self.db_path):
            logging.info(f"Criando banco de dados em: {self.db_path}")
        self._initialize_database()

    def _initialize_database(self):
        """
        Inicializa a tabela de relatórios.
        """
        conn = self.connect()
        try:
            self.create_table_reports(conn)
        finally:
            self.disconnect(conn)

    def connect(self) -> sqlite3.Connection:
        return sqlite3.connect(self.db_path)

    def disconnect(self, conn: sqlite3.Connection):
        conn.commit()
        conn.close()

    @staticmethod
    def create_table_reports(conn: sqlite3.Connection, table_name: str = "reports"):
        query = f'''
        CREATE TABLE IF NOT EXISTS {table_name} (
            id INTEGER PRIMARY KEY AUTOINCREMENT,
            hash TEXT UNIQUE,
            command TEXT,
            config TEXT,
            payload TEXT
        )
        '''
        conn.execute(query)

    def fetch(self, key: str, table_name: str = "reports") -> Optional[dict]:
        conn = self.connect()
        try:
            cursor = conn.cursor()
            cursor.execute(f"SELECT payload FROM {table_name} WHERE hash = ?", (key,))
            row = cursor.fetchone()
        finally:
            self.disconnect(conn)
        if row and row[0]:
            return json.loads(row[0])
        return None

    def save(self, key: str, command: str, config: dict, payload: dict, table_name: str = "reports"):
        conn = self.connect()
        try:
            conn.execute(
                f"INSERT OR REPLACE INTO {table_name} (hash, command, config, payload) VALUES (?, ?, ?, ?)",
                (key, command, json.dumps(config, sort_keys=True, default=str), json.dumps(payload, sort_keys=True))
            )
        finally:
            self.disconnect(conn)

    def count(self, table_name: str = "reports") -> int:
        conn = self.connect()
        try:
            return int(conn.execute(f"SELECT COUNT(*) FROM {table_name}").fetchone()[0])
        finally:
            self.disconnect(conn)

    def clear(self, table_name: str = "reports"):
        conn = self.connect()
        try:
            conn.execute(f"DELETE FROM {table_name}")
            logging.info(f"Cache {table_name} esvaziado")
        finally:
            self.disconnect(conn)
