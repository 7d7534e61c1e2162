from setuptools import setup


def get_version():
    version = {}
    with open('spnforensics/version.py') as fp:
        exec(fp.read(), version)
    return version['__version__']


__version__ = get_version()

setup(
    name='spnforensics',
    version=__version__,
    description='Camera sensor pattern noise forensics with wavelet and CNN extractors',
    long_description=''.join(open('README.rst').readlines()[4:]),
    package_dir={'spnforensics': 'spnforensics'},
    packages=['spnforensics'],
    install_requires=[
        'setuptools',
        'numpy',
        'scipy',
        'PyWavelets',
        'Pillow',
        'iminuit>=2',
        'tqdm',
    ],
    extras_require={
        'plot': ['matplotlib'],
        'test': ['pytest', 'matplotlib'],
    },
    entry_points={
        'console_scripts': ['spnforensics=spnforensics.cli:main'],
    },
    classifiers=[
        "Programming Language :: Python",
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Topic :: Scientific/Engineering :: Image Processing',
        'Intended Audience :: Science/Research',
        'Development Status :: 4 - Beta',
        'License :: OSI Approved :: MIT License'
    ],
)
