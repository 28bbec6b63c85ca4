# Backward-compatibility setup.py file
# See setup.cfg and pyproject.toml for project description
import setuptools

if __name__ == "__main__":
    setuptools.setup()
