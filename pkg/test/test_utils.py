import os.path

import pytest

from multisym.utils import data_hash, local_path


def test_local_path():
    """Test local_path resolves package resources"""
    assert os.path.isfile(local_path("theories/kg.thy"))
    assert os.path.isdir(local_path("templates"))


@pytest.mark.parametrize(
    "data,expected",
    [
        (b"", "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"),
        (b"abc", "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"),
    ],
)
def test_data_hash(data, expected):
    """Test data_hash is the SHA-256 hexadecimal digest"""
    assert data_hash(data) == expected