import logging
from pathlib import Path
from typing import Iterable, List, Union

from pydantic import ValidationError

from pose_pipeline.data.records import SampleRecord
from pose_pipeline.errors import DimensionMismatchError, SchemaError
from pose_pipeline.skeleton import SkeletonModel

logger = logging.getLogger(__name__)


def read_dataset(
    path: Union[str, Path], model: SkeletonModel, strict: bool = True
) -> List[SampleRecord]:
    """Read a JSON-lines sample file.

    Malformed records raise with their line number when ``strict``, otherwise
    they are logged and skipped. Blank lines are ignored.
    """
    path = Path(path)
    records: List[SampleRecord] = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = SampleRecord.model_validate_json(line)
                if record.num_landmarks != model.num_landmarks:
                    raise DimensionMismatchError(
                        f"record '{record.sample_id}' has {record.num_landmarks} landmarks, "
                        f"skeleton '{model.name}' has {model.num_landmarks}"
                    )
            except ValidationError as e:
                if strict:
                    raise SchemaError(f"{path}:{lineno}: invalid record: {e}") from e
                logger.warning(f"{path}:{lineno}: skipping invalid record: {e.error_count()} errors")
                continue
            except DimensionMismatchError as e:
                if strict:
                    raise DimensionMismatchError(f"{path}:{lineno}: {e}") from e
                logger.warning(f"{path}:{lineno}: skipping record: {e}")
                continue
            records.append(record)

    if not records:
        logger.warning(f"Dataset {path} contains no records")
    else:
        logger.info(f"Read {len(records)} records from {path}")
    return records


def write_dataset(records: Iterable[SampleRecord], path: Union[str, Path]) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for record in records:
            f.write(record.model_dump_json())
            f.write("\n")
            count += 1
    logger.info(f"Wrote {count} records to {path}")
    return count
