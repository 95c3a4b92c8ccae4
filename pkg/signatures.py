"""
Подписи процессов: JWS (HS256) с ключом, выведенным из общего секрета
и идентификатора подписанта. Ключи хранит только ядро симулятора.
"""
import hashlib
import json
import logging
from dataclasses import dataclass
from typing import Any

from jose import jws
from jose.exceptions import JWSError

from config import SIGNING_SECRET
from qsys import ProcessId, canonical_json

logger = logging.getLogger(__name__)

ALGORITHM = "HS256"


@dataclass(frozen=True)
class Signature:
    signer: ProcessId
    digest: str
    token: str


def payload_digest(payload: Any) -> str:
    """Отпечаток полезной нагрузки (sha256 канонического JSON)"""
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


class SignatureRegistry:
    def __init__(self, secret: str = SIGNING_SECRET):
        self._secret = secret

    def _key(self, signer: ProcessId) -> str:
        return f"{self._secret}:{signer}"

    def sign(self, signer: ProcessId, payload: Any) -> Signature:
        digest = payload_digest(payload)
        token = jws.sign({"sub": str(signer), "dig": digest}, self._key(signer), algorithm=ALGORITHM)
        return Signature(signer=signer, digest=digest, token=token)

    def verify(self, sig: Any, signer: ProcessId, payload: Any) -> bool:
        """Подпись верна, если её выдал sign для того же подписанта и той же нагрузки"""
        if not isinstance(sig, Signature) or sig.signer != signer:
            return False
        try:
            claims = jws.verify(sig.token, self._key(signer), algorithms=[ALGORITHM])
        except JWSError:
            logger.debug("подпись %s не прошла проверку", signer)
            return False
        data = json.loads(claims)
        return data.get("sub") == str(signer) and data.get("dig") == payload_digest(payload) == sig.digest
