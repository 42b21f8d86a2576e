from setuptools import setup, find_packages

setup(
    name="heavytail-bpre-lab",
    version="0.1.0",
    packages=find_packages(exclude=["tests", "tests.*", "examples", "examples.*"]),
    install_requires=[
        "pydantic==2.5.3",
        "pydantic-settings==2.1.0",
        "tenacity==8.2.3",
        "numpy==1.26.4",
        "scipy==1.11.4",
        "python-dotenv==1.0.0",
        "cachetools==5.3.2",
    ],
    entry_points={
        "console_scripts": [
            "bpre-lab=app.main:run",
        ],
    },
    python_requires=">=3.9",
)
