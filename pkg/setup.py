from setuptools import setup

setup(
    name="bforge",
    version="v0.1.0",
    install_requires=[
        "click==8.1.3; python_version >= '3.7'",
        "numpy==1.23.5; python_version >= '3.8'",
        "pydantic==1.10.2; python_version >= '3.7'",
        "scipy==1.9.3; python_version >= '3.8'",
        "typing-extensions==4.4.0; python_version >= '3.7'",
    ],
    python_requires=">=3.9",
    extras_require={
        "dev": [
            "attrs==22.1.0; python_version >= '3.5'",
            "black==22.10.0",
            "flake8==6.0.0",
            "iniconfig==1.1.1",
            "mccabe==0.7.0; python_version >= '3.6'",
            "mypy==0.991",
            "mypy-extensions==0.4.3",
            "packaging==20.9; python_version >= '2.7' and python_version not in '3.0, 3.1, 3.2, 3.3'",
            "pathspec==0.10.2; python_version >= '3.7'",
            "platformdirs==2.6.0; python_version >= '3.7'",
            "pluggy==1.0.0; python_version >= '3.6'",
            "pycodestyle==2.10.0; python_version >= '3.6'",
            "pyflakes==3.0.1; python_version >= '3.6'",
            "pytest==7.2.0",
            "tomli==2.0.1; python_version < '3.11'",
        ],
    },
    dependency_links=[],
    packages=["bforge"],
    entry_points={"console_scripts": ["bforge = bforge.cli:main"]},
)
