from setuptools import setup

setup(name='bqms',
    version='0.1b1',
    description='Bimodule quantum Markov semigroups on finite inclusions',
    long_description='Numerical checks for bimodule quantum channels, their '
        'generators, detailed balance and entropy gradient flows',
    license='MIT',
    packages=['bqms'],
    install_requires=['numpy', 'scipy>=1.6', 'parsley'],
    entry_points={
        'console_scripts': ['bqms=bqms.cli:main'],
    },
    classifiers=[
        'Development Status :: 4 - Beta',
        'Environment :: Console',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: MIT License',
        'Operating System :: OS Independent',
        'Programming Language :: Python :: 3',
        'Topic :: Scientific/Engineering :: Mathematics',
        'Topic :: Scientific/Engineering :: Physics',
    ],
    zip_safe=True)
